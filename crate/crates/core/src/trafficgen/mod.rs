//! Labeled synthetic traffic: scenarios of persona-driven devices become
//! classic pcap captures plus a JSON-ready sidecar of ground truth.

pub mod catalog;
mod generate;
mod scenario;
mod sidecar;
pub mod wire;

pub use catalog::{knowledge_for, KnowledgeSpec, RegistrySpec, UaRuleSpec};
pub use generate::{generate, GeneratedCapture};
pub use scenario::{
    office_small, office_small_policies, random_scenario, ActivityBlock, DeviceSpec, Pattern, Persona, Scenario,
    ScenarioError, ScenarioKind, DEFAULT_SNAP_LENGTH, DEFAULT_START, GATEWAY_IP, NTP_IP, SCHEMA_VERSION,
};
pub use sidecar::{
    verify_sidecar, Adjacency, DeviceLabel, EpochLabel, L2Adjacency, L3Adjacency, OccupancyLabel, SelfCheckFailure,
    SelfCheckReport, Sidecar, ViolationLabel,
};

#[cfg(test)]
mod tests;
