//! Resolution of competing attribute claims.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::AttributeClaim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompositionMode {
    /// Summed confidence per value; the largest sum wins.
    #[default]
    Ensemble,
    /// The value of the most accurate engine for the attribute wins.
    BestClassifier,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositionStrategy {
    pub mode: CompositionMode,
    /// `(engine_id, attribute)` → accuracy in `[0, 1]`.
    pub accuracy: BTreeMap<(String, String), f64>,
}

impl CompositionStrategy {
    pub fn ensemble() -> Self {
        Self::default()
    }

    pub fn best_classifier(accuracy: BTreeMap<(String, String), f64>) -> Self {
        CompositionStrategy {
            mode: CompositionMode::BestClassifier,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAttribute {
    pub value: String,
    pub confidence: f64,
    /// Engines whose claims support `value`, sorted.
    pub engines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompositionError {
    #[error("no claims to resolve")]
    NoClaims,
    #[error("no accuracy for engine {engine_id:?} on attribute {attribute:?}")]
    MissingAccuracy { engine_id: String, attribute: String },
}

/// Sums closer than this fraction of the total count as tied, so float
/// rounding cannot defeat the lexicographic tie-break.
const TIE_EPSILON: f64 = 1e-9;

/// Resolves the claims for one `(device, attribute)` pair.
pub fn resolve_attribute(
    claims: &[AttributeClaim],
    strategy: &CompositionStrategy,
) -> Result<ResolvedAttribute, CompositionError> {
    if claims.is_empty() {
        return Err(CompositionError::NoClaims);
    }
    match strategy.mode {
        CompositionMode::Ensemble => Ok(ensemble(claims)),
        CompositionMode::BestClassifier => best_classifier(claims, &strategy.accuracy),
    }
}

fn ensemble(claims: &[AttributeClaim]) -> ResolvedAttribute {
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for c in claims {
        *sums.entry(&c.value).or_default() += c.confidence;
    }
    let total: f64 = sums.values().sum();
    let max = sums.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = TIE_EPSILON * total.abs();
    let (value, sum) = sums
        .iter()
        .find(|(_, s)| **s >= max - eps)
        .map(|(v, s)| (*v, *s))
        .expect("nonempty");
    let engines: BTreeSet<&str> = claims
        .iter()
        .filter(|c| c.value == value)
        .map(|c| c.engine_id.as_str())
        .collect();
    ResolvedAttribute {
        value: value.to_string(),
        confidence: if total > 0.0 { sum / total } else { 0.0 },
        engines: engines.into_iter().map(str::to_string).collect(),
    }
}

fn best_classifier(
    claims: &[AttributeClaim],
    accuracy: &BTreeMap<(String, String), f64>,
) -> Result<ResolvedAttribute, CompositionError> {
    // best claim per engine: highest confidence, then smallest value
    let mut per_engine: BTreeMap<&str, &AttributeClaim> = BTreeMap::new();
    for c in claims {
        per_engine
            .entry(&c.engine_id)
            .and_modify(|best| {
                if c.confidence > best.confidence || (c.confidence == best.confidence && c.value < best.value) {
                    *best = c;
                }
            })
            .or_insert(c);
    }
    let mut winner: Option<(f64, &AttributeClaim)> = None;
    // BTreeMap iteration is by engine_id, so strict `>` keeps the smallest id on ties.
    for (engine, claim) in per_engine {
        let acc = accuracy
            .get(&(engine.to_string(), claim.attribute.clone()))
            .copied()
            .ok_or_else(|| CompositionError::MissingAccuracy {
                engine_id: engine.to_string(),
                attribute: claim.attribute.clone(),
            })?;
        if winner.map_or(true, |(best, _)| acc > best) {
            winner = Some((acc, claim));
        }
    }
    let (_, claim) = winner.expect("nonempty");
    Ok(ResolvedAttribute {
        value: claim.value.clone(),
        confidence: claim.confidence,
        engines: alloc::vec![claim.engine_id.clone()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::DeviceKey;
    use crate::{MacAddr, Timestamp};
    use proptest::prelude::*;

    fn claim(engine: &str, value: &str, confidence: f64) -> AttributeClaim {
        AttributeClaim {
            device_key: DeviceKey::Mac(MacAddr::ZERO),
            attribute: "device_type".into(),
            value: value.into(),
            confidence,
            engine_id: engine.into(),
            ts: Timestamp::from_secs(0),
        }
    }

    fn acc(pairs: &[(&str, f64)]) -> BTreeMap<(String, String), f64> {
        pairs
            .iter()
            .map(|(e, a)| ((e.to_string(), "device_type".to_string()), *a))
            .collect()
    }

    #[test]
    fn ensemble_sums_confidence() {
        let r = resolve_attribute(
            &[claim("E1", "printer", 0.6), claim("E2", "camera", 0.3)],
            &CompositionStrategy::ensemble(),
        )
        .unwrap();
        assert_eq!(r.value, "printer");
        assert!((r.confidence - 0.6 / 0.9).abs() < 1e-3);
        assert_eq!(r.engines, ["E1"]);
    }

    #[test]
    fn best_classifier_follows_accuracy() {
        let claims = [claim("E1", "printer", 0.6), claim("E2", "camera", 0.3)];
        let s = CompositionStrategy::best_classifier(acc(&[("E1", 0.5), ("E2", 0.9)]));
        assert_eq!(resolve_attribute(&claims, &s).unwrap().value, "camera");
    }

    #[test]
    fn ensemble_tie_is_lexicographic() {
        let r = resolve_attribute(
            &[claim("E2", "y", 0.5), claim("E1", "x", 0.5)],
            &CompositionStrategy::ensemble(),
        )
        .unwrap();
        assert_eq!(r.value, "x");
        assert_eq!(r.confidence, 0.5);
    }

    #[test]
    fn float_rounding_does_not_break_ties() {
        let r = resolve_attribute(
            &[claim("E1", "b", 0.1), claim("E2", "b", 0.2), claim("E3", "a", 0.3)],
            &CompositionStrategy::ensemble(),
        )
        .unwrap();
        assert_eq!(r.value, "a");
    }

    #[test]
    fn best_classifier_errors_and_ties() {
        let claims = [claim("E1", "printer", 0.6), claim("E2", "camera", 0.3)];
        let s = CompositionStrategy::best_classifier(acc(&[("E1", 0.5)]));
        assert_eq!(
            resolve_attribute(&claims, &s),
            Err(CompositionError::MissingAccuracy {
                engine_id: "E2".into(),
                attribute: "device_type".into()
            })
        );
        let s = CompositionStrategy::best_classifier(acc(&[("E1", 0.7), ("E2", 0.7)]));
        assert_eq!(resolve_attribute(&claims, &s).unwrap().value, "printer");
        assert_eq!(
            resolve_attribute(&[], &CompositionStrategy::ensemble()),
            Err(CompositionError::NoClaims)
        );
    }

    #[test]
    fn best_classifier_uses_engines_strongest_claim() {
        let claims = [
            claim("E1", "tablet", 0.4),
            claim("E1", "phone", 0.8),
            claim("E2", "x", 0.9),
        ];
        let s = CompositionStrategy::best_classifier(acc(&[("E1", 0.9), ("E2", 0.1)]));
        let r = resolve_attribute(&claims, &s).unwrap();
        assert_eq!((r.value.as_str(), r.confidence), ("phone", 0.8));
    }

    proptest! {
        #[test]
        fn ensemble_scale_invariant(
            raw in proptest::collection::vec((0usize..3, 0usize..4, 0.01f64..1.0), 1..12),
            c in 0.001f64..1000.0,
        ) {
            let values = ["a", "b", "c", "d"];
            let claims: Vec<_> = raw.iter().map(|(e, v, w)| claim(["E1", "E2", "E3"][*e], values[*v], *w)).collect();
            let scaled: Vec<_> = claims.iter().map(|k| AttributeClaim { confidence: k.confidence * c, ..k.clone() }).collect();
            let s = CompositionStrategy::ensemble();
            let a = resolve_attribute(&claims, &s).unwrap();
            let b = resolve_attribute(&scaled, &s).unwrap();
            prop_assert_eq!(&a.value, &b.value);
            prop_assert!((a.confidence - b.confidence).abs() < 1e-9);
        }
    }
}
