//! Declarative policy checks over profiles and decoded events.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decoders::{FlowRecord, ProtocolEvent};
use crate::knowledge::{domain_has_suffix, normalize_domain, KnowledgeBundle};
use crate::pipeline::{DeviceKey, IdentityResolver, ProfileSet};
use crate::Timestamp;

pub const DEFAULT_CLEARTEXT_PORTS: [u16; 2] = [80, 8080];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyKind {
    RequireRegistered,
    RequireEncrypted { cleartext_ports: BTreeSet<u16> },
    ForbidDeviceClass { class: String },
    ForbidDestGeo { countries: BTreeSet<String> },
    ForbidDomainSuffix { suffixes: Vec<String> },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::RequireRegistered => "RequireRegistered",
            PolicyKind::RequireEncrypted { .. } => "RequireEncrypted",
            PolicyKind::ForbidDeviceClass { .. } => "ForbidDeviceClass",
            PolicyKind::ForbidDestGeo { .. } => "ForbidDestGeo",
            PolicyKind::ForbidDomainSuffix { .. } => "ForbidDomainSuffix",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRule {
    pub rule_id: String,
    pub kind: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule_id: String,
    pub device_key: DeviceKey,
    /// First offending timestamp.
    pub ts: Timestamp,
    pub count: u64,
    /// Summary of the first offending observation.
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("duplicate rule id {0:?}")]
    DuplicateRuleId(String),
    #[error("rule id must be nonempty")]
    EmptyRuleId,
    #[error("rule {0:?} needs nonempty parameters")]
    EmptyParams(String),
    #[error("rule {rule_id:?}: unknown policy kind {kind:?}")]
    UnknownKind { rule_id: String, kind: String },
}

/// File form of a rule: the kind name plus whichever parameter it needs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub rule_id: String,
    pub kind: String,
    #[serde(default)]
    pub params: PolicyParams,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    /// RequireEncrypted; defaults to 80 and 8080.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ports: Option<Vec<u16>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countries: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suffixes: Option<Vec<String>>,
}

impl PolicySpec {
    pub fn to_rule(&self) -> Result<PolicyRule, PolicyError> {
        let kind = match self.kind.as_str() {
            "RequireRegistered" => PolicyKind::RequireRegistered,
            "RequireEncrypted" => PolicyKind::RequireEncrypted {
                cleartext_ports: match &self.params.ports {
                    Some(p) => p.iter().copied().collect(),
                    None => DEFAULT_CLEARTEXT_PORTS.into_iter().collect(),
                },
            },
            "ForbidDeviceClass" => PolicyKind::ForbidDeviceClass {
                class: self.params.class.clone().unwrap_or_default(),
            },
            "ForbidDestGeo" => PolicyKind::ForbidDestGeo {
                countries: self
                    .params
                    .countries
                    .iter()
                    .flatten()
                    .map(|c| c.trim().to_ascii_uppercase())
                    .collect(),
            },
            "ForbidDomainSuffix" => PolicyKind::ForbidDomainSuffix {
                suffixes: self.params.suffixes.clone().unwrap_or_default(),
            },
            other => {
                return Err(PolicyError::UnknownKind {
                    rule_id: self.rule_id.clone(),
                    kind: other.into(),
                })
            }
        };
        Ok(PolicyRule {
            rule_id: self.rule_id.clone(),
            kind,
        })
    }

    pub fn from_rule(rule: &PolicyRule) -> Self {
        let mut spec = PolicySpec {
            rule_id: rule.rule_id.clone(),
            kind: rule.kind.name().into(),
            ..PolicySpec::default()
        };
        match &rule.kind {
            PolicyKind::RequireRegistered => {}
            PolicyKind::RequireEncrypted { cleartext_ports } => {
                spec.params.ports = Some(cleartext_ports.iter().copied().collect())
            }
            PolicyKind::ForbidDeviceClass { class } => spec.params.class = Some(class.clone()),
            PolicyKind::ForbidDestGeo { countries } => {
                spec.params.countries = Some(countries.iter().cloned().collect())
            }
            PolicyKind::ForbidDomainSuffix { suffixes } => spec.params.suffixes = Some(suffixes.clone()),
        }
        spec
    }
}

/// Converts and validates a rule list read from a policy file.
pub fn rules_from_specs(specs: &[PolicySpec]) -> Result<Vec<PolicyRule>, PolicyError> {
    let rules = specs.iter().map(PolicySpec::to_rule).collect::<Result<Vec<_>, _>>()?;
    validate_policies(&rules)?;
    Ok(rules)
}

/// Rejects duplicate ids and kinds missing their parameters.
pub fn validate_policies(rules: &[PolicyRule]) -> Result<(), PolicyError> {
    let mut ids = BTreeSet::new();
    for r in rules {
        if r.rule_id.is_empty() {
            return Err(PolicyError::EmptyRuleId);
        }
        if !ids.insert(r.rule_id.as_str()) {
            return Err(PolicyError::DuplicateRuleId(r.rule_id.clone()));
        }
        let empty = match &r.kind {
            PolicyKind::RequireRegistered => false,
            PolicyKind::RequireEncrypted { cleartext_ports } => cleartext_ports.is_empty(),
            PolicyKind::ForbidDeviceClass { class } => class.trim().is_empty(),
            PolicyKind::ForbidDestGeo { countries } => countries.is_empty(),
            PolicyKind::ForbidDomainSuffix { suffixes } => {
                suffixes.is_empty() || suffixes.iter().any(|s| normalize_domain(s).is_empty())
            }
        };
        if empty {
            return Err(PolicyError::EmptyParams(r.rule_id.clone()));
        }
    }
    Ok(())
}

/// The event streams policies inspect.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInputs<'a> {
    pub events: &'a [ProtocolEvent],
    pub flows: &'a [FlowRecord],
    pub resolver: &'a IdentityResolver,
}

#[derive(Default)]
struct Collector(BTreeMap<(String, DeviceKey), Violation>);

impl Collector {
    fn hit(&mut self, rule: &str, key: DeviceKey, ts: Timestamp, evidence: impl FnOnce() -> String) {
        match self.0.get_mut(&(rule.into(), key)) {
            Some(v) => {
                v.count += 1;
                if ts < v.ts {
                    v.ts = ts;
                    v.evidence = evidence();
                }
            }
            None => {
                self.0.insert(
                    (rule.into(), key),
                    Violation {
                        rule_id: rule.into(),
                        device_key: key,
                        ts,
                        count: 1,
                        evidence: evidence(),
                    },
                );
            }
        }
    }
}

/// One violation per offending `(rule, device)`, sorted by rule id then
/// device key.
pub fn evaluate_policies(
    rules: &[PolicyRule],
    profiles: &ProfileSet,
    inputs: PolicyInputs<'_>,
    knowledge: &KnowledgeBundle,
) -> Vec<Violation> {
    let mut c = Collector::default();
    for rule in rules {
        let id = rule.rule_id.as_str();
        match &rule.kind {
            PolicyKind::RequireRegistered => {
                for p in profiles.iter() {
                    let mac = inputs.resolver.mac_of(&p.key).or(p.identity.mac);
                    let problem = match mac {
                        None => Some(String::from("no unique MAC address")),
                        Some(m) => match knowledge.registry.lookup_registration(m) {
                            None => Some(format!("MAC {m} not registered")),
                            Some(e) if !e.authorized => Some(format!("MAC {m} registered but not authorized")),
                            Some(_) => None,
                        },
                    };
                    if let Some(ev) = problem {
                        c.hit(id, p.key, p.first_seen, || ev);
                    }
                }
            }
            PolicyKind::RequireEncrypted { cleartext_ports } => {
                for ev in inputs.events {
                    let ProtocolEvent::Http(h) = ev else { continue };
                    let m = &h.meta;
                    if !cleartext_ports.contains(&m.dst_port) {
                        continue;
                    }
                    if let Some(k) = inputs.resolver.resolve_source(m.src_ip, m.src_mac, m.ts) {
                        c.hit(id, k, m.ts, || {
                            let host = h.host.as_deref().unwrap_or("-");
                            format!(
                                "cleartext HTTP {} {} to {}:{} host {}",
                                h.method, h.uri, m.dst_ip, m.dst_port, host
                            )
                        });
                    }
                }
            }
            PolicyKind::ForbidDeviceClass { class } => {
                for p in profiles.iter() {
                    if p.attribute("device_type") != Some(class.as_str()) {
                        continue;
                    }
                    let ts = p
                        .claims
                        .iter()
                        .filter(|cl| cl.attribute == "device_type" && cl.value == *class)
                        .map(|cl| cl.ts)
                        .min()
                        .unwrap_or(p.first_seen);
                    c.hit(id, p.key, ts, || format!("device_type resolved to {class}"));
                }
            }
            PolicyKind::ForbidDestGeo { countries } => {
                for f in inputs.flows {
                    let dst = f.responder();
                    let Some(cc) = knowledge.geo.lookup_geo(dst.ip) else {
                        continue;
                    };
                    if !countries.contains(cc) {
                        continue;
                    }
                    if let Some(k) = inputs.resolver.resolve(f.originator.ip, f.first_ts) {
                        c.hit(id, k, f.first_ts, || format!("flow to {}:{} in {cc}", dst.ip, dst.port));
                    }
                }
            }
            PolicyKind::ForbidDomainSuffix { suffixes } => {
                for ev in inputs.events {
                    let ProtocolEvent::Dns(d) = ev else { continue };
                    if d.is_response {
                        continue;
                    }
                    let Some(suffix) = suffixes.iter().find(|s| domain_has_suffix(&d.query_name, s)) else {
                        continue;
                    };
                    let m = &d.meta;
                    if let Some(k) = inputs.resolver.resolve_source(m.src_ip, m.src_mac, m.ts) {
                        c.hit(id, k, m.ts, || format!("DNS query {} matches {suffix}", d.query_name));
                    }
                }
            }
        }
    }
    c.0.into_values().collect()
}

/// Sorts by rule id, then device key.
pub fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| (&a.rule_id, a.device_key, a.ts).cmp(&(&b.rule_id, b.device_key, b.ts)));
}

/// One line per violation, in report order.
pub fn render_violations_text(violations: &[Violation]) -> String {
    let mut v = violations.to_vec();
    sort_violations(&mut v);
    let mut out = String::new();
    for x in v {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\tcount={}\t{}",
            x.rule_id, x.device_key, x.ts, x.count, x.evidence
        );
    }
    out
}
