//! Engine chain orchestration.
//!
//! A run decodes the whole capture onto the source topics, binds device
//! identities, then runs the engines in configuration order. Each engine
//! drains its subscriptions, and its claims are published on its emitted
//! topics before the next engine starts, so later engines can consume
//! them. Finally claims are composed into per-device profiles.

mod bus;
mod compose;
mod config;
mod engines;
mod identity;

pub use bus::{topics, Bus, BusError, Envelope, Message, Subscription};
pub use compose::{resolve_attribute, CompositionError, CompositionMode, CompositionStrategy, ResolvedAttribute};
pub use config::{ChainConfig, ConfigError, EngineDescriptor, EngineKind, Params};
pub use engines::{build_engine, Engine, EngineContext, EngineOutput, BUILTIN_ENGINES};
pub use identity::{bind_identity, DeviceIdentity, DeviceKey, IdentityResolver, IpEpoch, ParseDeviceKeyError};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::analyzers::{summarize_dns, BehaviorProfile};
use crate::decoders::{
    AppProtocol, DecodeStats, DecoderConfig, DnsEvent, FlowRecord, PacketDecoder, PacketObservation, ProtocolEvent,
};
use crate::ingest::{CaptureReader, IngestError, IngestStats};
use crate::knowledge::KnowledgeBundle;
use crate::policy::Violation;
use crate::Timestamp;

/// Attributes engines may claim.
pub const ATTRIBUTE_VOCABULARY: [&str; 8] = [
    "manufacturer",
    "os",
    "browser",
    "device_type",
    "is_iot",
    "owner",
    "stack",
    "behavior_mode",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeClaim {
    pub device_key: DeviceKey,
    pub attribute: String,
    pub value: String,
    /// In `(0, 1]`.
    pub confidence: f64,
    pub engine_id: String,
    /// Latest evidence supporting the claim.
    pub ts: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub key: DeviceKey,
    pub identity: DeviceIdentity,
    pub attributes: BTreeMap<String, ResolvedAttribute>,
    /// Claims before composition, in engine order.
    pub claims: Vec<AttributeClaim>,
    pub counters: BTreeMap<String, u64>,
    pub behavior: Option<BehaviorProfile>,
    pub violations: Vec<Violation>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
}

impl DeviceProfile {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(|a| a.value.as_str())
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.counters.get(name).copied().unwrap_or(0)
    }
}

/// Profiles of every internal device that sent traffic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileSet {
    pub profiles: BTreeMap<DeviceKey, DeviceProfile>,
}

impl ProfileSet {
    pub fn get(&self, key: &DeviceKey) -> Option<&DeviceProfile> {
        self.profiles.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DeviceProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Attaches violations to the profiles they name; others are ignored.
    pub fn attach_violations(&mut self, violations: &[Violation]) {
        for v in violations {
            if let Some(p) = self.profiles.get_mut(&v.device_key) {
                p.violations.push(v.clone());
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub engine_id: String,
    pub messages_in: u64,
    pub claims_out: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub ingest: IngestStats,
    /// Set when the capture ended mid-record; everything before it was
    /// processed.
    pub truncation: Option<IngestError>,
    pub decode: DecodeStats,
    /// In configuration order.
    pub engines: Vec<EngineStats>,
    pub topics: BTreeMap<String, u64>,
    /// Claims about devices with no profile or outside the vocabulary.
    pub dropped_claims: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub profiles: ProfileSet,
    pub stats: RunStats,
    pub resolver: IdentityResolver,
    pub observations: Vec<PacketObservation>,
    pub flows: Vec<FlowRecord>,
    pub events: Vec<ProtocolEvent>,
    /// Accepted claims, in engine order.
    pub claims: Vec<AttributeClaim>,
    pub span: Option<(Timestamp, Timestamp)>,
}

impl PipelineRun {
    /// One `(device, mac, ts)` per frame an internal device originated.
    pub fn activity(&self) -> Vec<(DeviceKey, Option<crate::MacAddr>, Timestamp)> {
        self.observations
            .iter()
            .filter_map(|o| {
                let key = self.resolver.resolve_source(o.src_ip?, o.src_mac, o.ts)?;
                Some((key, self.resolver.mac_of(&key), o.ts))
            })
            .collect()
    }

    /// Persons present per window; empty for an empty capture.
    pub fn occupancy(
        &self,
        registry: &crate::knowledge::DeviceRegistry,
        window_secs: u32,
    ) -> Vec<crate::analyzers::OccupancyEstimate> {
        match self.span {
            Some(span) => crate::analyzers::estimate_occupancy(self.activity(), span, registry, window_secs),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("composition failed for {device}: {source}")]
    Composition {
        device: DeviceKey,
        source: CompositionError,
    },
}

fn event_topic(ev: &ProtocolEvent) -> &'static str {
    match ev.protocol() {
        AppProtocol::Dns => topics::DNS,
        AppProtocol::Dhcp => topics::DHCP,
        AppProtocol::Http => topics::HTTP,
        AppProtocol::Tls => topics::TLS,
    }
}

/// Runs the whole chain over a pcap capture held in memory.
pub fn run_pipeline(
    capture: &[u8],
    config: &ChainConfig,
    knowledge: &KnowledgeBundle,
) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let mut engines = config
        .engines
        .iter()
        .map(|d| build_engine(d).map(|e| (d, e)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut reader = CaptureReader::open(capture)?;
    let mut decoder = PacketDecoder::new(DecoderConfig::default());
    let mut bus = Bus::new();
    for t in topics::SOURCES {
        bus.declare(t).expect("nonempty topic");
    }
    for t in config.engines.iter().flat_map(|d| &d.emits) {
        bus.declare(t).expect("validated");
    }
    let mut stats = RunStats::default();
    let mut observations = Vec::new();
    let mut flows = Vec::new();
    let mut events = Vec::new();
    let mut span: Option<(Timestamp, Timestamp)> = None;

    loop {
        let record = match reader.next_packet() {
            Ok(Some(r)) => r,
            Ok(None) => break,
            Err(e) => {
                stats.truncation = Some(e);
                break;
            }
        };
        span = Some(match span {
            None => (record.ts, record.ts),
            Some((a, b)) => (a.min(record.ts), b.max(record.ts)),
        });
        let d = decoder.decode(&record);
        if let Some(o) = d.observation {
            bus.publish(topics::PACKETS, Message::Packet(o)).expect("declared");
            observations.push(o);
        }
        if let Some(ev) = d.event {
            bus.publish(event_topic(&ev), Message::Event(ev.clone()))
                .expect("declared");
            events.push(ev);
        }
        for f in d.expired_flows {
            bus.publish(topics::FLOWS, Message::Flow(f.clone())).expect("declared");
            flows.push(f);
        }
    }
    for f in decoder.finish() {
        bus.publish(topics::FLOWS, Message::Flow(f.clone())).expect("declared");
        flows.push(f);
    }
    stats.ingest = reader.stats();
    stats.decode = decoder.stats().clone();

    let dhcp = events.iter().filter_map(|e| match e {
        ProtocolEvent::Dhcp(d) => Some(d),
        _ => None,
    });
    let resolver = bind_identity(dhcp, &observations);

    let mut outputs: Vec<EngineOutput> = Vec::with_capacity(engines.len());
    for (desc, engine) in engines.iter_mut() {
        let ctx = EngineContext {
            engine_id: &desc.engine_id,
            knowledge,
            resolver: &resolver,
            span,
        };
        let mut es = EngineStats {
            engine_id: desc.engine_id.clone(),
            ..Default::default()
        };
        let mut drained = BTreeSet::new();
        for topic in &desc.subscribes {
            if !drained.insert(topic.as_str()) {
                continue;
            }
            let mut sub = bus.subscribe(topic).expect("validated");
            while let Some(env) = bus.poll(&mut sub) {
                engine.on_message(&ctx, &env.message);
                es.messages_in += 1;
            }
        }
        let mut out = EngineOutput::default();
        engine.finish(&ctx, &mut out);
        es.claims_out = out.claims.len() as u64;
        for c in &out.claims {
            for topic in &desc.emits {
                bus.publish(topic, Message::Claim(c.clone())).expect("nonempty");
            }
        }
        stats.engines.push(es);
        outputs.push(out);
    }
    for t in bus.topic_names() {
        stats.topics.insert(t.to_string(), bus.topic_len(t));
    }

    // devices: internal senders
    let mut seen: BTreeMap<DeviceKey, (Timestamp, Timestamp)> = BTreeMap::new();
    for o in &observations {
        let Some(ip) = o.src_ip else { continue };
        if let Some(k) = resolver.resolve_source(ip, o.src_mac, o.ts) {
            let e = seen.entry(k).or_insert((o.ts, o.ts));
            e.0 = e.0.min(o.ts);
            e.1 = e.1.max(o.ts);
        }
    }
    let mut profiles: BTreeMap<DeviceKey, DeviceProfile> = seen
        .into_iter()
        .map(|(key, (first_seen, last_seen))| {
            let identity = resolver.identity(&key).cloned().unwrap_or(DeviceIdentity {
                key,
                mac: key.mac(),
                epochs: Vec::new(),
                conflicting_macs: Vec::new(),
            });
            let counters = ["flows", "bytes", "dns_queries", "distinct_dest_orgs"]
                .into_iter()
                .map(|c| (c.to_string(), 0))
                .collect();
            let p = DeviceProfile {
                key,
                identity,
                attributes: BTreeMap::new(),
                claims: Vec::new(),
                counters,
                behavior: None,
                violations: Vec::new(),
                first_seen,
                last_seen,
            };
            (key, p)
        })
        .collect();

    for f in &flows {
        let ends: BTreeSet<DeviceKey> = [f.originator.ip, f.responder().ip]
            .into_iter()
            .filter_map(|ip| resolver.resolve(ip, f.first_ts))
            .collect();
        for k in ends {
            if let Some(p) = profiles.get_mut(&k) {
                *p.counters.get_mut("flows").expect("preset") += 1;
                *p.counters.get_mut("bytes").expect("preset") += f.total_bytes();
            }
        }
    }
    let mut dns_by_device: BTreeMap<DeviceKey, Vec<&DnsEvent>> = BTreeMap::new();
    for ev in &events {
        if let ProtocolEvent::Dns(d) = ev {
            if !d.is_response {
                if let Some(k) = resolver.resolve_source(d.meta.src_ip, d.meta.src_mac, d.meta.ts) {
                    dns_by_device.entry(k).or_default().push(d);
                }
            }
        }
    }
    for (k, evs) in dns_by_device {
        if let Some(p) = profiles.get_mut(&k) {
            let s = summarize_dns(evs, &knowledge.domains);
            p.counters.insert("dns_queries".into(), s.total_queries);
            p.counters.insert("distinct_dest_orgs".into(), s.distinct_orgs as u64);
        }
    }

    let mut claims = Vec::new();
    for out in outputs {
        for (k, name, n) in out.counters {
            if let Some(p) = profiles.get_mut(&k) {
                *p.counters.entry(name).or_default() += n;
            }
        }
        for (k, b) in out.behavior {
            if let Some(p) = profiles.get_mut(&k) {
                p.behavior = Some(b);
            }
        }
        for c in out.claims {
            let known_attr = ATTRIBUTE_VOCABULARY.contains(&c.attribute.as_str());
            match profiles.get_mut(&c.device_key) {
                Some(p) if known_attr && c.confidence > 0.0 => {
                    p.claims.push(c.clone());
                    claims.push(c);
                }
                _ => stats.dropped_claims += 1,
            }
        }
    }

    for p in profiles.values_mut() {
        let mut by_attr: BTreeMap<&str, Vec<AttributeClaim>> = BTreeMap::new();
        for c in &p.claims {
            by_attr.entry(c.attribute.as_str()).or_default().push(c.clone());
        }
        let mut attributes = BTreeMap::new();
        for (attr, cs) in by_attr {
            let r = resolve_attribute(&cs, &config.composition)
                .map_err(|source| PipelineError::Composition { device: p.key, source })?;
            attributes.insert(attr.to_string(), r);
        }
        p.attributes = attributes;
    }

    Ok(PipelineRun {
        profiles: ProfileSet { profiles },
        stats,
        resolver,
        observations,
        flows,
        events,
        claims,
        span,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChainScore {
    pub correct: u64,
    pub total: u64,
}

impl ChainScore {
    /// Fraction of claims matching the label; 0 without claims.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Per `(engine_id, attribute)`: how many claims on labeled devices agree
/// with the label. Claims on unlabeled devices or attributes are ignored.
pub fn score_chains<'a, I>(
    claims: I,
    labels: &BTreeMap<DeviceKey, BTreeMap<String, String>>,
) -> BTreeMap<(String, String), ChainScore>
where
    I: IntoIterator<Item = &'a AttributeClaim>,
{
    let mut out: BTreeMap<(String, String), ChainScore> = BTreeMap::new();
    for c in claims {
        let Some(truth) = labels.get(&c.device_key).and_then(|l| l.get(&c.attribute)) else {
            continue;
        };
        let s = out.entry((c.engine_id.clone(), c.attribute.clone())).or_default();
        s.total += 1;
        if *truth == c.value {
            s.correct += 1;
        }
    }
    out
}

/// Accuracy table for best-classifier composition.
pub fn accuracy_table(scores: &BTreeMap<(String, String), ChainScore>) -> BTreeMap<(String, String), f64> {
    scores.iter().map(|(k, s)| (k.clone(), s.accuracy())).collect()
}
