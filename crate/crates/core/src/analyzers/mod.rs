//! Cognitive engines: deterministic classifiers over decoded events.
//!
//! Each analyzer is a pure function of its inputs and declared
//! thresholds; the pipeline engines wrap them and turn results into
//! attribute claims.

mod behavior;
mod dns;
mod iot;
mod manufacturer;
mod occupancy;
mod tls_fp;
mod user_agent;

pub use behavior::{
    burstiness, characterize_behavior, classify_mode, periodicity_score, window_count, BehaviorMode, BehaviorParams,
    BehaviorProfile, WindowStats,
};
pub use dns::{summarize_dns, DnsUsageSummary};
pub use iot::{classify_iot, IotDecision, IotParams};
pub use manufacturer::{infer_manufacturer, issuer_vendor, EvidenceSource, ManufacturerEvidence, ManufacturerParams};
pub use occupancy::{estimate_occupancy, occupancy_windows, OccupancyEstimate, DEFAULT_OCCUPANCY_WINDOW_SECS};
pub use tls_fp::{fingerprint_tls, FingerprintMatch};
pub use user_agent::{mine_user_agent, UaClaim};

use alloc::collections::BTreeMap;

/// Most frequent key, ties to the smallest.
pub(crate) fn mode_of<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> Option<K> {
    let max = counts.values().max()?;
    counts.iter().find(|(_, n)| *n == max).map(|(k, _)| k.clone())
}
