use super::DnsUsageSummary;

/// Thresholds of the DNS-dominance IoT classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IotParams {
    pub min_queries: u64,
    pub dominance: f64,
    pub max_orgs: usize,
    pub min_confidence: f64,
    pub max_confidence: f64,
}

impl Default for IotParams {
    fn default() -> Self {
        IotParams {
            min_queries: 5,
            dominance: 0.8,
            max_orgs: 3,
            min_confidence: 0.5,
            max_confidence: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IotDecision {
    pub is_iot: bool,
    pub dominance: f64,
    pub confidence: f64,
}

/// Single-purpose devices talk mostly to one organization. Silent below
/// `min_queries` owned-domain queries.
pub fn classify_iot(summary: &DnsUsageSummary, params: &IotParams) -> Option<IotDecision> {
    if summary.owned_queries < params.min_queries.max(1) {
        return None;
    }
    let (_, d) = summary.dominance()?;
    let is_iot = d >= params.dominance && summary.distinct_orgs <= params.max_orgs;
    let raw = if is_iot { d } else { 1.0 - d };
    Some(IotDecision {
        is_iot,
        dominance: d,
        confidence: raw.clamp(params.min_confidence, params.max_confidence),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::format;

    fn summary(hist: &[u64]) -> DnsUsageSummary {
        let org_histogram: BTreeMap<_, _> = hist
            .iter()
            .enumerate()
            .map(|(i, n)| (format!("org{i:02}"), *n))
            .collect();
        let owned = hist.iter().sum();
        DnsUsageSummary {
            total_queries: owned,
            owned_queries: owned,
            distinct_orgs: org_histogram.len(),
            org_histogram,
            ..Default::default()
        }
    }

    #[test]
    fn dominant_single_vendor() {
        let d = classify_iot(&summary(&[98, 2]), &IotParams::default()).unwrap();
        assert!(d.is_iot);
        assert!((d.confidence - 0.98).abs() < 1e-12);
    }

    #[test]
    fn diverse_usage_is_not_iot() {
        let d = classify_iot(&summary(&[2; 50]), &IotParams::default()).unwrap();
        assert!(!d.is_iot);
        // max share 0.02 here, so confidence is 1 - 0.02
        assert!((d.confidence - 0.98).abs() < 1e-12);
        // 50 organizations, the largest holding 10 of 100 queries
        let mut hist = alloc::vec![10u64];
        hist.extend([2u64; 41]);
        hist.extend([1u64; 8]);
        let s = summary(&hist);
        assert_eq!((s.distinct_orgs, s.owned_queries), (50, 100));
        let d = classify_iot(&s, &IotParams::default()).unwrap();
        assert!((d.dominance - 0.1).abs() < 1e-12);
        assert!((d.confidence - 0.9).abs() < 1e-12);
    }

    #[test]
    fn too_few_queries() {
        assert_eq!(classify_iot(&summary(&[3]), &IotParams::default()), None);
    }

    #[test]
    fn many_orgs_veto_dominance() {
        // 0.85 share but five organizations
        let d = classify_iot(&summary(&[85, 4, 4, 4, 3]), &IotParams::default()).unwrap();
        assert!(!d.is_iot);
        assert_eq!(d.confidence, 0.5);
    }
}
