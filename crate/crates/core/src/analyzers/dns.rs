use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::net::Ipv4Addr;

use crate::decoders::DnsEvent;
use crate::knowledge::DomainOwnershipTable;

/// One device's DNS usage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DnsUsageSummary {
    pub total_queries: u64,
    /// Queries whose name has a known owner.
    pub owned_queries: u64,
    pub distinct_domains: usize,
    pub distinct_orgs: usize,
    /// Owned queries per organization; sums to `owned_queries`.
    pub org_histogram: BTreeMap<String, u64>,
    pub unresolved_fraction: f64,
    /// Addresses seen in A answers delivered to the device.
    pub name_ips: BTreeMap<String, BTreeSet<Ipv4Addr>>,
}

impl DnsUsageSummary {
    /// Largest organization share of owned queries (ties to the smallest
    /// name), or `None` without owned queries.
    pub fn dominance(&self) -> Option<(&str, f64)> {
        if self.owned_queries == 0 {
            return None;
        }
        let max = *self.org_histogram.values().max()?;
        let (org, _) = self.org_histogram.iter().find(|(_, n)| **n == max)?;
        Some((org, max as f64 / self.owned_queries as f64))
    }
}

/// Queries are the non-response events; responses contribute answers.
pub fn summarize_dns<'a, I>(events: I, owners: &DomainOwnershipTable) -> DnsUsageSummary
where
    I: IntoIterator<Item = &'a DnsEvent>,
{
    let mut s = DnsUsageSummary::default();
    let mut domains = BTreeSet::new();
    for ev in events {
        if ev.is_response {
            for (name, ip) in &ev.answers {
                s.name_ips.entry(name.clone()).or_default().insert(*ip);
            }
            continue;
        }
        s.total_queries += 1;
        domains.insert(ev.query_name.as_str());
        if let Some(owner) = owners.lookup_domain_owner(&ev.query_name) {
            s.owned_queries += 1;
            *s.org_histogram.entry(owner.org.clone()).or_default() += 1;
        }
    }
    s.distinct_domains = domains.len();
    s.distinct_orgs = s.org_histogram.len();
    if s.total_queries > 0 {
        s.unresolved_fraction = (s.total_queries - s.owned_queries) as f64 / s.total_queries as f64;
    }
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::decoders::EventMeta;
    use crate::knowledge::DomainOwner;
    use crate::{MacAddr, Timestamp};
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    pub(crate) fn query(name: &str) -> DnsEvent {
        DnsEvent {
            meta: EventMeta {
                ts: Timestamp::from_secs(1),
                src_mac: MacAddr::ZERO,
                dst_mac: MacAddr::ZERO,
                src_ip: Ipv4Addr::new(10, 0, 0, 9),
                dst_ip: Ipv4Addr::new(10, 0, 0, 1),
                src_port: 5353,
                dst_port: 53,
            },
            query_name: name.to_string(),
            qtype: 1,
            answers: Vec::new(),
            is_response: false,
        }
    }

    pub(crate) fn owners(pairs: &[(&str, &str)]) -> DomainOwnershipTable {
        let mut t = DomainOwnershipTable::default();
        for (suffix, org) in pairs {
            t.insert(
                suffix,
                DomainOwner {
                    org: org.to_string(),
                    country: None,
                },
            )
            .unwrap();
        }
        t
    }

    #[test]
    fn single_org() {
        let t = owners(&[("vendor.com", "AcmeCorp")]);
        let evs: Vec<_> = (0..10).map(|i| query(&alloc::format!("h{i}.vendor.com"))).collect();
        let s = summarize_dns(&evs, &t);
        assert_eq!(s.distinct_orgs, 1);
        assert_eq!(s.org_histogram, BTreeMap::from([("AcmeCorp".to_string(), 10)]));
        assert_eq!(s.unresolved_fraction, 0.0);
        assert_eq!(s.dominance(), Some(("AcmeCorp", 1.0)));
    }

    #[test]
    fn no_queries() {
        let s = summarize_dns(&[], &owners(&[]));
        assert_eq!(s, DnsUsageSummary::default());
        assert_eq!(s.dominance(), None);
    }

    #[test]
    fn unresolved_share() {
        let t = owners(&[("vendor.com", "AcmeCorp")]);
        let evs = vec![
            query("a.vendor.com"),
            query("b.vendor.com"),
            query("a.vendor.com"),
            query("mystery.example"),
        ];
        let s = summarize_dns(&evs, &t);
        assert_eq!(s.unresolved_fraction, 0.25);
        assert_eq!(s.distinct_domains, 3);
        assert_eq!(s.owned_queries, 3);
    }

    #[test]
    fn answers_feed_the_name_cache() {
        let mut resp = query("example.com");
        resp.is_response = true;
        resp.answers = vec![("example.com".into(), Ipv4Addr::new(93, 184, 216, 34))];
        let s = summarize_dns(&[resp], &owners(&[]));
        assert_eq!(s.total_queries, 0);
        assert!(s.name_ips["example.com"].contains(&Ipv4Addr::new(93, 184, 216, 34)));
    }
}
