use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::scenario::Persona;
use crate::decoders::{DecoderConfig, DhcpMessageType, PacketDecoder, ProtocolEvent, TlsStage};
use crate::ingest::{CaptureReader, IngestError};
use crate::MacAddr;

/// Ground truth written next to a generated capture.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub packet_count: u64,
    /// Every device that sent at least one frame, by device key.
    pub devices: Vec<DeviceLabel>,
    /// One entry per DHCP Ack, by address then time.
    pub epochs: Vec<EpochLabel>,
    pub violations: Vec<ViolationLabel>,
    pub iot_labels: BTreeMap<String, bool>,
    pub occupancy: Vec<OccupancyLabel>,
    pub adjacency: Adjacency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceLabel {
    pub device_key: String,
    pub id: String,
    pub mac: MacAddr,
    pub persona: Persona,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    pub first_seen_micros: u64,
    pub last_seen_micros: u64,
    /// Expected resolved attributes.
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLabel {
    pub ip: Ipv4Addr,
    pub device_key: String,
    pub start_micros: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationLabel {
    pub rule_id: String,
    pub device_key: String,
}

/// `[start, end)` in Unix seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyLabel {
    pub start: u32,
    pub end: u32,
    pub persons: Vec<String>,
    pub unattributed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adjacency {
    pub l2: Vec<L2Adjacency>,
    pub l3: Vec<L3Adjacency>,
}

/// Unicast frames between two MACs in either direction; `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2Adjacency {
    pub a: MacAddr,
    pub b: MacAddr,
    pub frames: u64,
}

/// Flows from `src` to `dst`, named like L3 graph nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L3Adjacency {
    pub src: String,
    pub dst: String,
    pub flows: u64,
}

impl Sidecar {
    pub fn device(&self, key: &str) -> Option<&DeviceLabel> {
        self.devices.iter().find(|d| d.device_key == key)
    }

    /// `device key → attribute → value`, the shape chain scoring expects.
    pub fn attribute_labels(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.devices
            .iter()
            .map(|d| (d.device_key.clone(), d.attributes.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfCheckReport {
    pub packets: u64,
    pub labels_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelfCheckFailure {
    #[error("capture unreadable: {0}")]
    Capture(IngestError),
    #[error("{} unevidenced label(s): {}", .0.len(), .0.join("; "))]
    Unevidenced(Vec<String>),
}

#[derive(Default)]
struct Evidence {
    src_macs: BTreeSet<MacAddr>,
    ips_of: BTreeMap<MacAddr, BTreeSet<Ipv4Addr>>,
    l2: BTreeMap<(MacAddr, MacAddr), u64>,
    queries: BTreeSet<MacAddr>,
    user_agents: BTreeSet<MacAddr>,
    hellos: BTreeSet<MacAddr>,
    acks: BTreeSet<(Ipv4Addr, MacAddr, u64)>,
    internal_secs: BTreeSet<u32>,
    flows: BTreeSet<(Ipv4Addr, Ipv4Addr)>,
}

fn gather(pcap: &[u8]) -> Result<(u64, Evidence), SelfCheckFailure> {
    let mut ev = Evidence::default();
    if pcap.is_empty() {
        return Ok((0, ev));
    }
    let mut reader = CaptureReader::open(pcap).map_err(SelfCheckFailure::Capture)?;
    let mut dec = PacketDecoder::new(DecoderConfig::default());
    let mut flows = Vec::new();
    let mut n = 0;
    while let Some(p) = reader.next_packet().map_err(SelfCheckFailure::Capture)? {
        n += 1;
        let d = dec.decode(&p);
        if let Some(o) = d.observation {
            ev.src_macs.insert(o.src_mac);
            if let Some(ip) = o.src_ip {
                if crate::is_internal_ip(ip) || ip.is_unspecified() {
                    ev.internal_secs.insert(o.ts.secs);
                    ev.ips_of.entry(o.src_mac).or_default().insert(ip);
                }
            }
            if !o.dst_mac.is_multicast() {
                let k = if o.src_mac <= o.dst_mac {
                    (o.src_mac, o.dst_mac)
                } else {
                    (o.dst_mac, o.src_mac)
                };
                *ev.l2.entry(k).or_default() += 1;
            }
        }
        match d.event {
            Some(ProtocolEvent::Dns(e)) if !e.is_response => {
                ev.queries.insert(e.meta.src_mac);
            }
            Some(ProtocolEvent::Http(e)) if e.user_agent.is_some() => {
                ev.user_agents.insert(e.meta.src_mac);
            }
            Some(ProtocolEvent::Tls(e)) if e.stage == TlsStage::ClientHello => {
                ev.hellos.insert(e.meta.src_mac);
            }
            Some(ProtocolEvent::Dhcp(e)) if e.msg_type == DhcpMessageType::Ack => {
                if let Some(ip) = e.assigned_ip {
                    ev.acks.insert((ip, e.client_mac, e.meta.ts.as_micros()));
                }
            }
            _ => {}
        }
        flows.extend(d.expired_flows);
    }
    flows.extend(dec.finish());
    ev.flows = flows.iter().map(|f| (f.originator.ip, f.responder().ip)).collect();
    Ok((n, ev))
}

fn key_mac(key: &str) -> Option<MacAddr> {
    key.strip_prefix("mac:").and_then(|m| m.parse().ok())
}

/// Re-decodes `pcap` and confirms every label in `sidecar` is backed by
/// traffic in it.
pub fn verify_sidecar(pcap: &[u8], sidecar: &Sidecar) -> Result<SelfCheckReport, SelfCheckFailure> {
    let (packets, ev) = gather(pcap)?;
    let mut missing = Vec::new();
    let mut checked = 0;
    let mut check = |ok: bool, what: String| {
        checked += 1;
        if !ok {
            missing.push(what);
        }
    };
    check(
        packets == sidecar.packet_count,
        format!("packet count {} (capture has {packets})", sidecar.packet_count),
    );

    let known: BTreeSet<&str> = sidecar.devices.iter().map(|d| d.device_key.as_str()).collect();
    for d in &sidecar.devices {
        check(
            key_mac(&d.device_key) == Some(d.mac),
            format!("device key {} names {}", d.device_key, d.mac),
        );
        check(
            ev.src_macs.contains(&d.mac),
            format!("device {} sends nothing", d.device_key),
        );
        if d.attributes.contains_key("device_type") {
            check(
                ev.user_agents.contains(&d.mac),
                format!("device_type of {} without a user agent", d.device_key),
            );
        }
        if d.attributes.contains_key("stack") {
            check(
                ev.hellos.contains(&d.mac),
                format!("stack of {} without a ClientHello", d.device_key),
            );
        }
    }
    for e in &sidecar.epochs {
        let ok = key_mac(&e.device_key).is_some_and(|m| ev.acks.contains(&(e.ip, m, e.start_micros)));
        check(ok, format!("epoch {} of {} at {}", e.ip, e.device_key, e.start_micros));
    }
    for v in &sidecar.violations {
        check(
            known.contains(v.device_key.as_str()),
            format!("violation {} on unknown {}", v.rule_id, v.device_key),
        );
    }
    for (key, iot) in &sidecar.iot_labels {
        let mac = key_mac(key);
        let ok = known.contains(key.as_str()) && (!iot || mac.is_some_and(|m| ev.queries.contains(&m)));
        check(ok, format!("iot label of {key}"));
    }
    for w in &sidecar.occupancy {
        let busy = ev.internal_secs.range(w.start..w.end).next().is_some();
        let labeled = !w.persons.is_empty() || w.unattributed > 0;
        check(busy == labeled, format!("occupancy window {}..{}", w.start, w.end));
    }
    for w in sidecar.occupancy.windows(2) {
        check(w[0].end == w[1].start, format!("occupancy gap at {}", w[0].end));
    }
    let l2: BTreeMap<(MacAddr, MacAddr), u64> = sidecar.adjacency.l2.iter().map(|e| ((e.a, e.b), e.frames)).collect();
    check(l2 == ev.l2, "l2 adjacency differs from the capture".into());
    let ips = |node: &str| -> BTreeSet<Ipv4Addr> {
        if let Some(ip) = node.strip_prefix("ext:").and_then(|s| s.parse().ok()) {
            return [ip].into_iter().collect();
        }
        key_mac(node)
            .and_then(|m| ev.ips_of.get(&m).cloned())
            .unwrap_or_default()
    };
    for e in &sidecar.adjacency.l3 {
        let (a, b) = (ips(&e.src), ips(&e.dst));
        let ok = ev.flows.iter().any(|(x, y)| a.contains(x) && b.contains(y));
        check(ok, format!("l3 edge {} -> {}", e.src, e.dst));
    }
    if missing.is_empty() {
        Ok(SelfCheckReport {
            packets,
            labels_checked: checked,
        })
    } else {
        Err(SelfCheckFailure::Unevidenced(missing))
    }
}
