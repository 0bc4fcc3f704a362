use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{mode_of, DnsUsageSummary};
use crate::knowledge::{OuiTable, VendorAliases};
use crate::MacAddr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvidenceSource {
    Oui,
    DhcpVendorClass,
    TlsIssuer,
    DnsOrg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturerParams {
    pub oui_confidence: f64,
    pub dhcp_confidence: f64,
    pub tls_confidence: f64,
    pub dns_confidence: f64,
    pub dns_dominance: f64,
    pub dns_min_queries: u64,
}

impl Default for ManufacturerParams {
    fn default() -> Self {
        ManufacturerParams {
            oui_confidence: 0.9,
            dhcp_confidence: 0.7,
            tls_confidence: 0.6,
            dns_confidence: 0.5,
            dns_dominance: 0.8,
            dns_min_queries: 5,
        }
    }
}

/// Everything one device revealed about its maker.
#[derive(Debug, Clone, Default)]
pub struct ManufacturerEvidence<'a> {
    pub mac: Option<MacAddr>,
    /// DHCP option 60 strings, one entry per message.
    pub vendor_classes: Vec<&'a str>,
    /// Issuer commonNames of certificates the device presented.
    pub issuers: Vec<&'a str>,
    pub dns: Option<&'a DnsUsageSummary>,
}

/// Vendor token of a certificate issuer: the normalized vendor if an alias
/// matches, else the first word of the commonName.
pub fn issuer_vendor(issuer_cn: &str, aliases: &VendorAliases) -> Option<String> {
    if let Some(v) = aliases.normalize(issuer_cn) {
        return Some(v.to_string());
    }
    issuer_cn.split_whitespace().next().map(str::to_string)
}

fn most_common<I: IntoIterator<Item = String>>(values: I) -> Option<String> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    mode_of(&counts)
}

/// At most one `(source, vendor, confidence)` per evidence source.
pub fn infer_manufacturer(
    ev: &ManufacturerEvidence<'_>,
    oui: &OuiTable,
    aliases: &VendorAliases,
    params: &ManufacturerParams,
) -> Vec<(EvidenceSource, String, f64)> {
    let mut out = Vec::new();
    if let Some(v) = ev.mac.and_then(|m| oui.lookup_vendor(m).vendor) {
        out.push((EvidenceSource::Oui, v.to_string(), params.oui_confidence));
    }
    let dhcp = most_common(
        ev.vendor_classes
            .iter()
            .filter_map(|c| aliases.normalize(c).map(str::to_string)),
    );
    if let Some(v) = dhcp {
        out.push((EvidenceSource::DhcpVendorClass, v, params.dhcp_confidence));
    }
    if let Some(v) = most_common(ev.issuers.iter().filter_map(|cn| issuer_vendor(cn, aliases))) {
        out.push((EvidenceSource::TlsIssuer, v, params.tls_confidence));
    }
    if let Some(s) = ev.dns {
        if s.owned_queries >= params.dns_min_queries {
            if let Some((org, d)) = s.dominance() {
                if d >= params.dns_dominance {
                    out.push((EvidenceSource::DnsOrg, org.to_string(), params.dns_confidence));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::parse_oui_prefix;
    use crate::pipeline::{resolve_attribute, AttributeClaim, CompositionStrategy, DeviceKey};
    use crate::Timestamp;

    fn oui() -> OuiTable {
        let mut t = OuiTable::default();
        t.insert(parse_oui_prefix("02:00:00").unwrap(), "TestVendor").unwrap();
        t.insert(parse_oui_prefix("3c:a1:0d").unwrap(), "VendorA").unwrap();
        t
    }

    fn dns(org: &str, n: u64) -> DnsUsageSummary {
        DnsUsageSummary {
            total_queries: n,
            owned_queries: n,
            distinct_orgs: 1,
            org_histogram: BTreeMap::from([(org.to_string(), n)]),
            ..Default::default()
        }
    }

    fn ensemble(found: &[(EvidenceSource, String, f64)]) -> (String, f64) {
        let claims: Vec<_> = found
            .iter()
            .map(|(src, v, c)| AttributeClaim {
                device_key: DeviceKey::Mac(MacAddr::ZERO),
                attribute: "manufacturer".into(),
                value: v.clone(),
                confidence: *c,
                engine_id: alloc::format!("{src:?}"),
                ts: Timestamp::from_secs(0),
            })
            .collect();
        let r = resolve_attribute(&claims, &CompositionStrategy::ensemble()).unwrap();
        (r.value, r.confidence)
    }

    #[test]
    fn oui_only() {
        let ev = ManufacturerEvidence {
            mac: Some("02:00:00:00:00:07".parse().unwrap()),
            ..Default::default()
        };
        let found = infer_manufacturer(&ev, &oui(), &VendorAliases::default(), &Default::default());
        assert_eq!(found, [(EvidenceSource::Oui, "TestVendor".to_string(), 0.9)]);
    }

    #[test]
    fn oui_and_dns_agree() {
        let summary = dns("TestVendor", 20);
        let ev = ManufacturerEvidence {
            mac: Some("02:00:00:00:00:07".parse().unwrap()),
            dns: Some(&summary),
            ..Default::default()
        };
        let found = infer_manufacturer(&ev, &oui(), &VendorAliases::default(), &Default::default());
        assert_eq!(found.len(), 2);
        let (v, c) = ensemble(&found);
        assert_eq!(v, "TestVendor");
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oui_outweighs_issuer() {
        let ev = ManufacturerEvidence {
            mac: Some("3c:a1:0d:00:00:01".parse().unwrap()),
            issuers: alloc::vec!["VendorB CA"],
            ..Default::default()
        };
        let found = infer_manufacturer(&ev, &oui(), &VendorAliases::default(), &Default::default());
        assert_eq!(found[1], (EvidenceSource::TlsIssuer, "VendorB".to_string(), 0.6));
        assert_eq!(ensemble(&found).0, "VendorA");
    }

    #[test]
    fn vendor_class_goes_through_normalization() {
        let mut aliases = VendorAliases::default();
        aliases.push("acme", "Acme").unwrap();
        let ev = ManufacturerEvidence {
            vendor_classes: alloc::vec!["acme-ipcam-2.0", "acme-ipcam-2.0", "unmapped"],
            issuers: alloc::vec!["Acme IoT CA"],
            ..Default::default()
        };
        let found = infer_manufacturer(&ev, &OuiTable::default(), &aliases, &Default::default());
        assert_eq!(
            found,
            [
                (EvidenceSource::DhcpVendorClass, "Acme".to_string(), 0.7),
                (EvidenceSource::TlsIssuer, "Acme".to_string(), 0.6)
            ]
        );
        let ev = ManufacturerEvidence {
            vendor_classes: alloc::vec!["unmapped"],
            ..Default::default()
        };
        assert!(infer_manufacturer(&ev, &OuiTable::default(), &aliases, &Default::default()).is_empty());
    }

    #[test]
    fn weak_dns_dominance_is_silent() {
        let mut summary = dns("A", 7);
        summary.org_histogram.insert("B".into(), 3);
        summary.owned_queries = 10;
        summary.distinct_orgs = 2;
        let ev = ManufacturerEvidence {
            dns: Some(&summary),
            ..Default::default()
        };
        assert!(infer_manufacturer(
            &ev,
            &OuiTable::default(),
            &VendorAliases::default(),
            &Default::default()
        )
        .is_empty());
    }
}
