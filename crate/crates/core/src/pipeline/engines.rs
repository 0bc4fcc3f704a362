//! Built-in engines.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use super::bus::Message;
use super::config::{ConfigError, EngineDescriptor, Params};
use super::identity::{DeviceKey, IdentityResolver};
use super::{AttributeClaim, ATTRIBUTE_VOCABULARY};
use crate::analyzers::{
    characterize_behavior, classify_iot, fingerprint_tls, issuer_vendor, mine_user_agent, summarize_dns,
    BehaviorParams, BehaviorProfile, FingerprintMatch, IotParams, ManufacturerParams,
};
use crate::decoders::{DnsEvent, ProtocolEvent, TlsStage};
use crate::knowledge::KnowledgeBundle;
use crate::{MacAddr, Timestamp};

/// Read-only state shared with every engine.
#[derive(Debug, Clone, Copy)]
pub struct EngineContext<'a> {
    pub engine_id: &'a str,
    pub knowledge: &'a KnowledgeBundle,
    pub resolver: &'a IdentityResolver,
    /// First and last packet timestamps of the capture.
    pub span: Option<(Timestamp, Timestamp)>,
}

impl EngineContext<'_> {
    pub fn claim(
        &self,
        key: DeviceKey,
        attribute: &str,
        value: &str,
        confidence: f64,
        ts: Timestamp,
    ) -> AttributeClaim {
        AttributeClaim {
            device_key: key,
            attribute: attribute.to_string(),
            value: value.to_string(),
            confidence,
            engine_id: self.engine_id.to_string(),
            ts,
        }
    }

    /// Device that sent a frame, if internal.
    pub fn source(&self, ip: Option<Ipv4Addr>, mac: MacAddr, ts: Timestamp) -> Option<DeviceKey> {
        self.resolver.resolve_source(ip?, mac, ts)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineOutput {
    pub claims: Vec<AttributeClaim>,
    /// Per-device counters merged into profiles.
    pub counters: Vec<(DeviceKey, String, u64)>,
    pub behavior: Vec<(DeviceKey, BehaviorProfile)>,
}

pub trait Engine {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message);
    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput);
}

pub const BUILTIN_ENGINES: [&str; 12] = [
    "oui_vendor",
    "dhcp_vendor",
    "tls_issuer",
    "dns_org",
    "iot_dns",
    "user_agent",
    "tls_fingerprint",
    "behavior",
    "registry_owner",
    "iot_device_type",
    "static_claim",
    "null",
];

/// Instantiates the implementation named by the descriptor.
pub fn build_engine(d: &EngineDescriptor) -> Result<Box<dyn Engine>, ConfigError> {
    let id = d.engine_id.as_str();
    let p = &d.params;
    let m = ManufacturerParams::default();
    let conf = |default: f64| p.f64_or(id, "confidence", default);
    Ok(match d.implementation() {
        "oui_vendor" => Box::new(OuiVendor {
            confidence: conf(m.oui_confidence)?,
            seen: BTreeMap::new(),
        }),
        "dhcp_vendor" => Box::new(DhcpVendor {
            confidence: conf(m.dhcp_confidence)?,
            classes: BTreeMap::new(),
        }),
        "tls_issuer" => Box::new(TlsIssuer {
            confidence: conf(m.tls_confidence)?,
            issuers: BTreeMap::new(),
        }),
        "dns_org" => Box::new(DnsOrg {
            confidence: conf(m.dns_confidence)?,
            dominance: p.f64_or(id, "dominance", m.dns_dominance)?,
            min_queries: p.u64_or(id, "min_queries", m.dns_min_queries)?,
            dns: DnsByDevice::default(),
        }),
        "iot_dns" => {
            let def = IotParams::default();
            Box::new(IotDns {
                params: IotParams {
                    min_queries: p.u64_or(id, "min_queries", def.min_queries)?,
                    dominance: p.f64_or(id, "dominance", def.dominance)?,
                    max_orgs: p.u64_or(id, "max_orgs", def.max_orgs as u64)? as usize,
                    ..def
                },
                dns: DnsByDevice::default(),
            })
        }
        "user_agent" => Box::new(UserAgent {
            confidence: conf(0.8)?,
            agents: BTreeMap::new(),
        }),
        "tls_fingerprint" => Box::new(TlsFingerprint {
            confidence: conf(0.7)?,
            hellos: BTreeMap::new(),
        }),
        "behavior" => {
            let def = BehaviorParams::default();
            Box::new(Behavior {
                confidence: conf(0.6)?,
                params: BehaviorParams {
                    window_secs: p
                        .u64_or(id, "window_secs", u64::from(def.window_secs))?
                        .clamp(1, u64::from(u32::MAX)) as u32,
                    periodicity_threshold: p.f64_or(id, "periodicity_threshold", def.periodicity_threshold)?,
                    ..def
                },
                packets: BTreeMap::new(),
                flow_starts: BTreeMap::new(),
            })
        }
        "registry_owner" => Box::new(RegistryOwner {
            confidence: conf(1.0)?,
            seen: BTreeMap::new(),
        }),
        "iot_device_type" => {
            let classes = p.get("classes").unwrap_or("camera,sensor,printer,thermostat,speaker");
            Box::new(IotFromDeviceType {
                confidence: conf(0.6)?,
                classes: classes
                    .split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect(),
                seen: BTreeMap::new(),
            })
        }
        "static_claim" => Box::new(StaticClaim::new(id, p)?),
        "null" => Box::new(Null),
        other => {
            return Err(ConfigError::UnknownImplementation {
                engine_id: id.to_string(),
                implementation: other.to_string(),
            })
        }
    })
}

fn touch(map: &mut BTreeMap<DeviceKey, Timestamp>, key: DeviceKey, ts: Timestamp) {
    let t = map.entry(key).or_insert(ts);
    *t = (*t).max(ts);
}

/// Most frequent value, ties to the smallest.
fn mode<'a, I: IntoIterator<Item = &'a str>>(values: I) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    crate::analyzers::mode_of(&counts)
}

struct OuiVendor {
    confidence: f64,
    seen: BTreeMap<DeviceKey, Timestamp>,
}

impl Engine for OuiVendor {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        if let Message::Packet(p) = msg {
            if let Some(k) = ctx.source(p.src_ip, p.src_mac, p.ts) {
                touch(&mut self.seen, k, p.ts);
            }
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, ts) in &self.seen {
            let Some(mac) = ctx.resolver.mac_of(key) else { continue };
            if let Some(v) = ctx.knowledge.oui.lookup_vendor(mac).vendor {
                out.claims
                    .push(ctx.claim(*key, "manufacturer", v, self.confidence, *ts));
            }
        }
    }
}

struct DhcpVendor {
    confidence: f64,
    classes: BTreeMap<DeviceKey, (Vec<String>, Timestamp)>,
}

impl Engine for DhcpVendor {
    fn on_message(&mut self, _ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Event(ProtocolEvent::Dhcp(ev)) = msg else {
            return;
        };
        if ev.msg_type.is_server_message() {
            return;
        }
        let Some(class) = &ev.vendor_class else { return };
        let e = self
            .classes
            .entry(DeviceKey::Mac(ev.client_mac))
            .or_insert((Vec::new(), ev.meta.ts));
        e.0.push(class.clone());
        e.1 = e.1.max(ev.meta.ts);
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        let aliases = &ctx.knowledge.vendor_aliases;
        for (key, (classes, ts)) in &self.classes {
            if let Some(v) = mode(classes.iter().filter_map(|c| aliases.normalize(c))) {
                out.claims
                    .push(ctx.claim(*key, "manufacturer", v, self.confidence, *ts));
            }
        }
    }
}

struct TlsIssuer {
    confidence: f64,
    issuers: BTreeMap<DeviceKey, (Vec<String>, Timestamp)>,
}

impl Engine for TlsIssuer {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Event(ProtocolEvent::Tls(ev)) = msg else {
            return;
        };
        if ev.stage != TlsStage::Certificate {
            return;
        }
        let Some(cn) = &ev.issuer_cn else { return };
        let m = &ev.meta;
        let Some(key) = ctx.source(Some(m.src_ip), m.src_mac, m.ts) else {
            return;
        };
        let Some(vendor) = issuer_vendor(cn, &ctx.knowledge.vendor_aliases) else {
            return;
        };
        let e = self.issuers.entry(key).or_insert((Vec::new(), m.ts));
        e.0.push(vendor);
        e.1 = e.1.max(m.ts);
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, (vendors, ts)) in &self.issuers {
            if let Some(v) = mode(vendors.iter().map(String::as_str)) {
                out.claims
                    .push(ctx.claim(*key, "manufacturer", v, self.confidence, *ts));
            }
        }
    }
}

/// DNS queries grouped by the querying device.
#[derive(Default)]
struct DnsByDevice(BTreeMap<DeviceKey, (Vec<DnsEvent>, Timestamp)>);

impl DnsByDevice {
    fn observe(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Event(ProtocolEvent::Dns(ev)) = msg else {
            return;
        };
        if ev.is_response {
            return;
        }
        let m = &ev.meta;
        if let Some(key) = ctx.source(Some(m.src_ip), m.src_mac, m.ts) {
            let e = self.0.entry(key).or_insert((Vec::new(), m.ts));
            e.0.push(ev.clone());
            e.1 = e.1.max(m.ts);
        }
    }
}

struct DnsOrg {
    confidence: f64,
    dominance: f64,
    min_queries: u64,
    dns: DnsByDevice,
}

impl Engine for DnsOrg {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        self.dns.observe(ctx, msg);
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, (events, ts)) in &self.dns.0 {
            let s = summarize_dns(events, &ctx.knowledge.domains);
            if s.owned_queries < self.min_queries {
                continue;
            }
            if let Some((org, d)) = s.dominance() {
                if d >= self.dominance {
                    out.claims
                        .push(ctx.claim(*key, "manufacturer", org, self.confidence, *ts));
                }
            }
        }
    }
}

struct IotDns {
    params: IotParams,
    dns: DnsByDevice,
}

impl Engine for IotDns {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        self.dns.observe(ctx, msg);
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, (events, ts)) in &self.dns.0 {
            let s = summarize_dns(events, &ctx.knowledge.domains);
            if let Some(d) = classify_iot(&s, &self.params) {
                let v = if d.is_iot { "true" } else { "false" };
                out.claims.push(ctx.claim(*key, "is_iot", v, d.confidence, *ts));
            }
        }
    }
}

struct UserAgent {
    confidence: f64,
    agents: BTreeMap<DeviceKey, (BTreeSet<String>, Timestamp)>,
}

impl Engine for UserAgent {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Event(ProtocolEvent::Http(ev)) = msg else {
            return;
        };
        let Some(ua) = &ev.user_agent else { return };
        let m = &ev.meta;
        if let Some(key) = ctx.source(Some(m.src_ip), m.src_mac, m.ts) {
            let e = self.agents.entry(key).or_insert((BTreeSet::new(), m.ts));
            e.0.insert(ua.clone());
            e.1 = e.1.max(m.ts);
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, (agents, ts)) in &self.agents {
            let mined = mine_user_agent(
                agents.iter().map(String::as_str),
                &ctx.knowledge.ua_rules,
                &ATTRIBUTE_VOCABULARY,
            );
            // one claim per distinct (attribute, value)
            let distinct: BTreeSet<(&str, &str)> = mined.iter().map(|c| (c.attribute, c.value)).collect();
            for (attr, value) in distinct {
                out.claims.push(ctx.claim(*key, attr, value, self.confidence, *ts));
            }
        }
    }
}

struct TlsFingerprint {
    confidence: f64,
    hellos: BTreeMap<DeviceKey, (BTreeMap<Vec<u16>, u64>, Timestamp)>,
}

impl Engine for TlsFingerprint {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Event(ProtocolEvent::Tls(ev)) = msg else {
            return;
        };
        let (TlsStage::ClientHello, Some(suites)) = (ev.stage, &ev.cipher_suites) else {
            return;
        };
        let m = &ev.meta;
        if let Some(key) = ctx.source(Some(m.src_ip), m.src_mac, m.ts) {
            let e = self.hellos.entry(key).or_insert((BTreeMap::new(), m.ts));
            *e.0.entry(suites.clone()).or_default() += 1;
            e.1 = e.1.max(m.ts);
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, (hellos, ts)) in &self.hellos {
            let mut stacks = BTreeSet::new();
            for (suites, n) in hellos {
                match fingerprint_tls(suites, &ctx.knowledge.tls_fingerprints) {
                    FingerprintMatch::Known { stack, .. } => {
                        stacks.insert(stack);
                    }
                    FingerprintMatch::Unknown { fingerprint } => {
                        out.counters
                            .push((*key, alloc::format!("unknown_tls_fp:{fingerprint}"), *n));
                    }
                }
            }
            for stack in stacks {
                out.claims.push(ctx.claim(*key, "stack", stack, self.confidence, *ts));
            }
        }
    }
}

struct Behavior {
    confidence: f64,
    params: BehaviorParams,
    packets: BTreeMap<DeviceKey, Vec<(Timestamp, u64)>>,
    flow_starts: BTreeMap<DeviceKey, Vec<Timestamp>>,
}

impl Engine for Behavior {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        match msg {
            Message::Packet(p) => {
                if let Some(key) = ctx.source(p.src_ip, p.src_mac, p.ts) {
                    self.packets
                        .entry(key)
                        .or_default()
                        .push((p.ts, u64::from(p.frame_len)));
                }
            }
            Message::Flow(f) => {
                if let Some(key) = ctx.resolver.resolve(f.originator.ip, f.first_ts) {
                    self.flow_starts.entry(key).or_default().push(f.first_ts);
                }
            }
            _ => {}
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        let Some(span) = ctx.span else { return };
        for (key, pkts) in &self.packets {
            let starts = self.flow_starts.get(key).map(Vec::as_slice).unwrap_or(&[]);
            let Some(b) = characterize_behavior(pkts.iter().copied(), starts.iter().copied(), span, &self.params)
            else {
                continue;
            };
            let last = pkts.iter().map(|(t, _)| *t).max().unwrap_or(span.1);
            out.claims
                .push(ctx.claim(*key, "behavior_mode", b.mode.as_str(), self.confidence, last));
            out.behavior.push((*key, b));
        }
    }
}

struct RegistryOwner {
    confidence: f64,
    seen: BTreeMap<DeviceKey, Timestamp>,
}

impl Engine for RegistryOwner {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        if let Message::Packet(p) = msg {
            if let Some(k) = ctx.source(p.src_ip, p.src_mac, p.ts) {
                touch(&mut self.seen, k, p.ts);
            }
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, ts) in &self.seen {
            let Some(mac) = ctx.resolver.mac_of(key) else { continue };
            let owner = ctx
                .knowledge
                .registry
                .lookup_registration(mac)
                .and_then(|e| e.owner.as_deref());
            if let Some(owner) = owner {
                out.claims.push(ctx.claim(*key, "owner", owner, self.confidence, *ts));
            }
        }
    }
}

/// Chain stage: turns `device_type` claims of embedded classes into
/// `is_iot` claims.
struct IotFromDeviceType {
    confidence: f64,
    classes: BTreeSet<String>,
    seen: BTreeMap<DeviceKey, Timestamp>,
}

impl Engine for IotFromDeviceType {
    fn on_message(&mut self, _ctx: &EngineContext<'_>, msg: &Message) {
        let Message::Claim(c) = msg else { return };
        if c.attribute == "device_type" && self.classes.contains(&c.value) {
            touch(&mut self.seen, c.device_key, c.ts);
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, ts) in &self.seen {
            out.claims.push(ctx.claim(*key, "is_iot", "true", self.confidence, *ts));
        }
    }
}

/// Claims `attribute = value` for every internal source seen; useful for
/// exercising composition.
struct StaticClaim {
    attribute: String,
    value: String,
    confidence: f64,
    seen: BTreeMap<DeviceKey, Timestamp>,
}

impl StaticClaim {
    fn new(id: &str, p: &Params) -> Result<Self, ConfigError> {
        let need = |k: &str| {
            p.get(k).map(str::to_string).ok_or_else(|| ConfigError::BadParam {
                engine_id: id.to_string(),
                key: k.to_string(),
                value: String::new(),
            })
        };
        Ok(StaticClaim {
            attribute: need("attribute")?,
            value: need("value")?,
            confidence: p.f64_or(id, "confidence", 0.5)?,
            seen: BTreeMap::new(),
        })
    }
}

impl Engine for StaticClaim {
    fn on_message(&mut self, ctx: &EngineContext<'_>, msg: &Message) {
        if let Message::Packet(p) = msg {
            if let Some(k) = ctx.source(p.src_ip, p.src_mac, p.ts) {
                touch(&mut self.seen, k, p.ts);
            }
        }
    }

    fn finish(&mut self, ctx: &EngineContext<'_>, out: &mut EngineOutput) {
        for (key, ts) in &self.seen {
            out.claims
                .push(ctx.claim(*key, &self.attribute, &self.value, self.confidence, *ts));
        }
    }
}

struct Null;

impl Engine for Null {
    fn on_message(&mut self, _ctx: &EngineContext<'_>, _msg: &Message) {}
    fn finish(&mut self, _ctx: &EngineContext<'_>, _out: &mut EngineOutput) {}
}
