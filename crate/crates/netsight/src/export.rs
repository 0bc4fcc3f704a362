//! Machine-readable report formats. JSON objects are written with sorted
//! keys; timestamps are integer Unix microseconds unless named `_secs`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use netsight_core::analyzers::OccupancyEstimate;
use netsight_core::pipeline::{AttributeClaim, DeviceProfile, ProfileSet};
use netsight_core::policy::Violation;
use netsight_core::topology::{DependencyEdge, L2Graph, L3Graph, ResiliencyReport};
use serde::{Deserialize, Serialize};

/// One line of `profiles.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRecord {
    pub device_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<String>,
    pub ips: Vec<IpRecord>,
    pub attributes: BTreeMap<String, AttributeRecord>,
    pub counters: BTreeMap<String, u64>,
    pub first_seen: u64,
    pub last_seen: u64,
    pub violations: Vec<ViolationRecord>,
    /// Claims before composition, in engine order.
    pub claims: Vec<ClaimRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<BehaviorRecord>,
    /// Other MACs seen using this identity's address without DHCP evidence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicting_macs: Vec<String>,
}

impl ProfileRecord {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(|a| a.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpRecord {
    pub ip: String,
    pub start: Option<u64>,
    pub end: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeRecord {
    pub value: String,
    pub confidence: f64,
    pub engines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimRecord {
    pub engine_id: String,
    pub attribute: String,
    pub value: String,
    pub confidence: f64,
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorRecord {
    pub mode: String,
    pub window_secs: u32,
    pub windows: usize,
    pub mean_bytes: f64,
    pub periodicity_score: f64,
    pub burstiness: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationRecord {
    pub rule_id: String,
    pub device_key: String,
    pub ts: u64,
    pub count: u64,
    pub evidence: String,
}

impl From<&Violation> for ViolationRecord {
    fn from(v: &Violation) -> Self {
        ViolationRecord {
            rule_id: v.rule_id.clone(),
            device_key: v.device_key.to_string(),
            ts: v.ts.as_micros(),
            count: v.count,
            evidence: v.evidence.clone(),
        }
    }
}

fn claim_record(c: &AttributeClaim) -> ClaimRecord {
    ClaimRecord {
        engine_id: c.engine_id.clone(),
        attribute: c.attribute.clone(),
        value: c.value.clone(),
        confidence: c.confidence,
        ts: c.ts.as_micros(),
    }
}

impl From<&DeviceProfile> for ProfileRecord {
    fn from(p: &DeviceProfile) -> Self {
        ProfileRecord {
            device_key: p.key.to_string(),
            mac: p.identity.mac.map(|m| m.to_string()),
            ips: p
                .identity
                .epochs
                .iter()
                .map(|e| IpRecord {
                    ip: e.ip.to_string(),
                    start: e.start.map(|t| t.as_micros()),
                    end: e.end.map(|t| t.as_micros()),
                })
                .collect(),
            attributes: p
                .attributes
                .iter()
                .map(|(k, a)| {
                    let r = AttributeRecord {
                        value: a.value.clone(),
                        confidence: a.confidence,
                        engines: a.engines.clone(),
                    };
                    (k.clone(), r)
                })
                .collect(),
            counters: p.counters.clone(),
            first_seen: p.first_seen.as_micros(),
            last_seen: p.last_seen.as_micros(),
            violations: p.violations.iter().map(ViolationRecord::from).collect(),
            claims: p.claims.iter().map(claim_record).collect(),
            behavior: p.behavior.as_ref().map(|b| BehaviorRecord {
                mode: b.mode.as_str().into(),
                window_secs: b.window_secs,
                windows: b.series.len(),
                mean_bytes: b.mean_bytes,
                periodicity_score: b.periodicity_score,
                burstiness: b.burstiness,
            }),
            conflicting_macs: p.identity.conflicting_macs.iter().map(|m| m.to_string()).collect(),
        }
    }
}

/// Serializes with keys sorted at every level.
pub fn json_line<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable report");
    serde_json::to_string(&v).expect("plain json")
}

fn ndjson<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&json_line(&item));
        out.push('\n');
    }
    out
}

/// One line per profile, in device-key order.
pub fn profiles_ndjson(profiles: &ProfileSet) -> String {
    ndjson(profiles.iter().map(ProfileRecord::from))
}

pub fn violations_ndjson(violations: &[Violation]) -> String {
    ndjson(violations.iter().map(ViolationRecord::from))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyRecord {
    pub start_secs: u32,
    pub end_secs: u32,
    pub count: usize,
    pub persons: Vec<String>,
    pub unattributed_devices: usize,
}

pub fn occupancy_ndjson(windows: &[OccupancyEstimate]) -> String {
    ndjson(windows.iter().map(|w| OccupancyRecord {
        start_secs: w.start.secs,
        end_secs: w.end.secs,
        count: w.count(),
        persons: w.present_persons.iter().cloned().collect(),
        unattributed_devices: w.unattributed_devices,
    }))
}

/// A parse failure in an NDJSON file, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct NdjsonError {
    pub line: usize,
    pub message: String,
}

/// Parses `profiles.ndjson`, keeping each record's original line.
pub fn parse_profiles(text: &str) -> Result<Vec<(String, ProfileRecord)>, NdjsonError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (l.to_string(), r))
                .map_err(|e| NdjsonError {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Everything topology inference produced for one capture.
#[derive(Debug, Clone, Default)]
pub struct TopologyReport {
    pub l2: L2Graph,
    pub l3: L3Graph,
    pub dependencies: Vec<DependencyEdge>,
    pub resiliency: ResiliencyReport,
}

/// `{nodes, edges}` for the L3 graph plus the L2 view, dependencies and
/// the resiliency report.
pub fn topology_json(t: &TopologyReport) -> String {
    let nodes: Vec<_> =
        t.l3.nodes
            .iter()
            .map(|(n, info)| serde_json::json!({"id": n.to_string(), "internal": n.is_internal(), "roles": info.roles}))
            .collect();
    let edges: Vec<_> = t
        .l3
        .edges
        .iter()
        .map(|((a, b), e)| serde_json::json!({"src": a.to_string(), "dst": b.to_string(), "flows": e.flows, "bytes": e.bytes}))
        .collect();
    let l2_nodes: Vec<_> = t
        .l2
        .nodes
        .iter()
        .map(|(m, n)| {
            serde_json::json!({"mac": m.to_string(), "frames_sent": n.frames_sent, "gateway_candidate": n.is_gateway_candidate})
        })
        .collect();
    let l2_edges: Vec<_> =
        t.l2.edges
            .iter()
            .map(|((a, b), n)| serde_json::json!({"a": a.to_string(), "b": b.to_string(), "frames": n}))
            .collect();
    let deps: Vec<_> = t
        .dependencies
        .iter()
        .map(|d| {
            serde_json::json!({
                "dependent": d.dependent.to_string(),
                "provider": d.provider.to_string(),
                "service": d.service.to_string(),
                "evidence_count": d.evidence_count,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "nodes": nodes,
        "edges": edges,
        "l2": {"nodes": l2_nodes, "edges": l2_edges, "group_frames": t.l2.group_frames},
        "dependencies": deps,
        "resiliency": resiliency_value(&t.resiliency),
    });
    serde_json::to_string_pretty(&doc).expect("plain json") + "\n"
}

fn resiliency_value(r: &ResiliencyReport) -> serde_json::Value {
    serde_json::json!({
        "articulation_points": r.articulation_points.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
        "fan_in": r.fan_in_ranking.iter().map(|(p, n)| serde_json::json!({"provider": p.to_string(), "dependents": n})).collect::<Vec<_>>(),
        "hidden_components": r.hidden_components.iter().map(|h| serde_json::json!({
            "provider": h.provider.to_string(),
            "dependents": h.dependents,
            "byte_share": h.byte_share,
        })).collect::<Vec<_>>(),
    })
}

/// One line per finding: articulation points, then hidden components.
pub fn resiliency_ndjson(r: &ResiliencyReport) -> String {
    let mut lines: Vec<serde_json::Value> = r
        .articulation_points
        .iter()
        .map(|n| serde_json::json!({"kind": "articulation_point", "node": n.to_string()}))
        .collect();
    lines.extend(r.hidden_components.iter().map(|h| {
        serde_json::json!({
            "kind": "hidden_component",
            "node": h.provider.to_string(),
            "dependents": h.dependents,
            "byte_share": h.byte_share,
        })
    }));
    ndjson(lines)
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

/// The L3 graph in Graphviz form.
pub fn topology_dot(t: &TopologyReport) -> String {
    let mut out = String::from("digraph l3 {\n");
    for (n, info) in &t.l3.nodes {
        let mut label = n.to_string();
        if n.is_internal() {
            label.push_str("\\ninternal");
        }
        for r in &info.roles {
            let _ = write!(label, "\\n{r}");
        }
        let shape = if n.is_internal() { "box" } else { "ellipse" };
        let _ = writeln!(
            out,
            "  {} [label={}, shape={shape}];",
            dot_id(&n.to_string()),
            dot_id(&label)
        );
    }
    for ((a, b), e) in &t.l3.edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{} flows / {} B\", weight={}];",
            dot_id(&a.to_string()),
            dot_id(&b.to_string()),
            e.flows,
            e.bytes,
            e.flows
        );
    }
    out.push_str("}\n");
    out
}
