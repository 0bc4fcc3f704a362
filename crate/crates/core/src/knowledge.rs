//! Offline knowledge tables: MAC vendor prefixes, user-agent signature
//! rules, domain ownership, IP geolocation, the device registry, TLS
//! cipher fingerprints and vendor-name normalization.
//!
//! Tables are immutable once built and every lookup is total.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;
use core::str::FromStr;

use regex_automata::meta::Regex;

use crate::MacAddr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("invalid MAC prefix {0:?}")]
    BadPrefix(String),
    #[error("empty value for {0}")]
    Empty(&'static str),
    #[error("duplicate key {0:?}")]
    Duplicate(String),
    #[error("invalid pattern in rule {rule_id}: {reason}")]
    BadPattern { rule_id: String, reason: String },
    #[error("invalid CIDR {0:?}")]
    BadCidr(String),
    #[error("invalid country code {0:?}")]
    BadCountry(String),
}

/// 24-bit OUI → vendor name.
#[derive(Debug, Clone, Default)]
pub struct OuiTable {
    entries: BTreeMap<[u8; 3], String>,
}

/// Result of a vendor lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VendorLookup<'a> {
    pub vendor: Option<&'a str>,
    /// The address has the locally-administered bit set and no registered
    /// prefix matched.
    pub local_admin: bool,
}

pub fn parse_oui_prefix(s: &str) -> Result<[u8; 3], KnowledgeError> {
    crate::types::parse_octets::<3>(s).map_err(|_| KnowledgeError::BadPrefix(s.to_string()))
}

impl OuiTable {
    pub fn insert(&mut self, prefix: [u8; 3], vendor: &str) -> Result<(), KnowledgeError> {
        let vendor = vendor.trim();
        if vendor.is_empty() {
            return Err(KnowledgeError::Empty("vendor"));
        }
        if self.entries.contains_key(&prefix) {
            return Err(KnowledgeError::Duplicate(alloc::format!(
                "{:02x}:{:02x}:{:02x}",
                prefix[0],
                prefix[1],
                prefix[2]
            )));
        }
        self.entries.insert(prefix, vendor.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup_vendor(&self, mac: MacAddr) -> VendorLookup<'_> {
        match self.entries.get(&mac.oui()) {
            Some(v) => VendorLookup {
                vendor: Some(v),
                local_admin: false,
            },
            None => VendorLookup {
                vendor: None,
                local_admin: mac.is_local_admin(),
            },
        }
    }
}

/// One signature rule: first match in list order wins.
#[derive(Debug, Clone)]
pub struct UaRule {
    pub rule_id: String,
    pub pattern: String,
    pub attrs: BTreeMap<String, String>,
    regex: Regex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UaMatch<'a> {
    pub rule_id: &'a str,
    pub attrs: &'a BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct UaRuleSet {
    rules: Vec<UaRule>,
}

impl UaRuleSet {
    pub fn push(
        &mut self,
        rule_id: &str,
        pattern: &str,
        attrs: BTreeMap<String, String>,
    ) -> Result<(), KnowledgeError> {
        if rule_id.is_empty() {
            return Err(KnowledgeError::Empty("rule_id"));
        }
        if self.rules.iter().any(|r| r.rule_id == rule_id) {
            return Err(KnowledgeError::Duplicate(rule_id.to_string()));
        }
        let regex = Regex::new(pattern).map_err(|e| KnowledgeError::BadPattern {
            rule_id: rule_id.to_string(),
            reason: e.to_string(),
        })?;
        self.rules.push(UaRule {
            rule_id: rule_id.to_string(),
            pattern: pattern.to_string(),
            attrs,
            regex,
        });
        Ok(())
    }

    pub fn rules(&self) -> &[UaRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn match_user_agent(&self, ua: &str) -> Option<UaMatch<'_>> {
        self.rules.iter().find(|r| r.regex.is_match(ua)).map(|r| UaMatch {
            rule_id: &r.rule_id,
            attrs: &r.attrs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainOwner {
    pub org: String,
    pub country: Option<String>,
}

/// Lower-cases and strips surrounding whitespace and trailing dots.
pub fn normalize_domain(name: &str) -> String {
    name.trim().trim_end_matches('.').to_ascii_lowercase()
}

/// `name` equals `suffix` or ends with `.suffix`. Both must be normalized.
pub fn domain_has_suffix(name: &str, suffix: &str) -> bool {
    if suffix.is_empty() {
        return false;
    }
    name == suffix
        || (name.len() > suffix.len()
            && name.ends_with(suffix)
            && name.as_bytes()[name.len() - suffix.len() - 1] == b'.')
}

/// Domain suffix → owning organization, longest whole-label suffix wins.
#[derive(Debug, Clone, Default)]
pub struct DomainOwnershipTable {
    entries: BTreeMap<String, DomainOwner>,
}

impl DomainOwnershipTable {
    pub fn insert(&mut self, suffix: &str, owner: DomainOwner) -> Result<(), KnowledgeError> {
        let key = normalize_domain(suffix);
        let key = key.trim_start_matches('.');
        if key.is_empty() {
            return Err(KnowledgeError::Empty("domain suffix"));
        }
        if owner.org.trim().is_empty() {
            return Err(KnowledgeError::Empty("org"));
        }
        if let Some(c) = &owner.country {
            validate_country(c)?;
        }
        if self.entries.contains_key(key) {
            return Err(KnowledgeError::Duplicate(key.to_string()));
        }
        self.entries.insert(key.to_string(), owner);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DomainOwner)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn lookup_domain_owner(&self, fqdn: &str) -> Option<&DomainOwner> {
        let name = normalize_domain(fqdn);
        let mut rest = name.as_str();
        loop {
            if let Some(owner) = self.entries.get(rest) {
                return Some(owner);
            }
            let i = rest.find('.')?;
            rest = &rest[i + 1..];
        }
    }
}

fn validate_country(c: &str) -> Result<(), KnowledgeError> {
    if c.len() == 2 && c.bytes().all(|b| b.is_ascii_alphabetic()) {
        Ok(())
    } else {
        Err(KnowledgeError::BadCountry(c.to_string()))
    }
}

/// IPv4 prefix with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv4Cidr {
    network: Ipv4Addr,
    prefix_len: u8,
}

impl Ipv4Cidr {
    pub fn new(addr: Ipv4Addr, prefix_len: u8) -> Option<Self> {
        (prefix_len <= 32).then(|| Ipv4Cidr {
            network: Ipv4Addr::from(u32::from(addr) & mask(prefix_len)),
            prefix_len,
        })
    }

    pub fn network(&self) -> Ipv4Addr {
        self.network
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & mask(self.prefix_len) == u32::from(self.network)
    }
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

impl FromStr for Ipv4Cidr {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || KnowledgeError::BadCidr(s.to_string());
        let (addr, len) = s.trim().split_once('/').ok_or_else(bad)?;
        let addr: Ipv4Addr = addr.parse().map_err(|_| bad())?;
        let len: u8 = len.parse().map_err(|_| bad())?;
        Ipv4Cidr::new(addr, len).ok_or_else(bad)
    }
}

impl fmt::Display for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network, self.prefix_len)
    }
}

/// CIDR → country code, longest prefix wins. Overlaps are allowed; an
/// exact duplicate prefix keeps its first country.
#[derive(Debug, Clone, Default)]
pub struct GeoTable {
    by_prefix: BTreeMap<(u8, u32), String>,
}

impl GeoTable {
    pub fn insert(&mut self, cidr: Ipv4Cidr, country: &str) -> Result<(), KnowledgeError> {
        let country = country.trim();
        validate_country(country)?;
        let key = (cidr.prefix_len, u32::from(cidr.network));
        if self.by_prefix.contains_key(&key) {
            return Err(KnowledgeError::Duplicate(cidr.to_string()));
        }
        self.by_prefix.insert(key, country.to_ascii_uppercase());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.by_prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_prefix.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Ipv4Cidr, &str)> {
        self.by_prefix
            .iter()
            .map(|((len, net), c)| (Ipv4Cidr::new(Ipv4Addr::from(*net), *len).expect("valid"), c.as_str()))
    }

    pub fn lookup_geo(&self, ip: Ipv4Addr) -> Option<&str> {
        if self.by_prefix.is_empty() {
            return None;
        }
        let addr = u32::from(ip);
        (0..=32u8)
            .rev()
            .find_map(|len| self.by_prefix.get(&(len, addr & mask(len))))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    /// Person id; `None` for shared or infrastructure equipment.
    pub owner: Option<String>,
    pub device_id: String,
    pub device_class: String,
    pub authorized: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DeviceRegistry {
    entries: BTreeMap<MacAddr, RegistryEntry>,
}

impl DeviceRegistry {
    pub fn insert(&mut self, mac: MacAddr, entry: RegistryEntry) -> Result<(), KnowledgeError> {
        if self.entries.contains_key(&mac) {
            return Err(KnowledgeError::Duplicate(mac.to_string()));
        }
        if entry.device_id.trim().is_empty() {
            return Err(KnowledgeError::Empty("device_id"));
        }
        self.entries.insert(mac, entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup_registration(&self, mac: MacAddr) -> Option<&RegistryEntry> {
        self.entries.get(&mac)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MacAddr, &RegistryEntry)> {
        self.entries.iter()
    }

    /// Distinct person ids owning at least one device.
    pub fn persons(&self) -> BTreeSet<&str> {
        self.entries.values().filter_map(|e| e.owner.as_deref()).collect()
    }
}

/// Cipher-suite fingerprint → client stack name.
#[derive(Debug, Clone, Default)]
pub struct TlsFingerprintRules {
    map: BTreeMap<String, String>,
}

impl TlsFingerprintRules {
    pub fn insert(&mut self, fingerprint: &str, stack: &str) -> Result<(), KnowledgeError> {
        let fp = fingerprint.trim().to_ascii_lowercase();
        if fp.is_empty() {
            return Err(KnowledgeError::Empty("fingerprint"));
        }
        if stack.trim().is_empty() {
            return Err(KnowledgeError::Empty("stack"));
        }
        if self.map.contains_key(&fp) {
            return Err(KnowledgeError::Duplicate(fp));
        }
        self.map.insert(fp, stack.trim().to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<&str> {
        self.map.get(fingerprint).map(String::as_str)
    }
}

/// Raw vendor substring → canonical vendor name; first listed match wins.
#[derive(Debug, Clone, Default)]
pub struct VendorAliases {
    rules: Vec<(String, String)>,
}

impl VendorAliases {
    pub fn push(&mut self, raw_substring: &str, canonical: &str) -> Result<(), KnowledgeError> {
        let raw = raw_substring.trim().to_ascii_lowercase();
        if raw.is_empty() {
            return Err(KnowledgeError::Empty("raw vendor substring"));
        }
        if canonical.trim().is_empty() {
            return Err(KnowledgeError::Empty("canonical vendor"));
        }
        self.rules.push((raw, canonical.trim().to_string()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn normalize(&self, raw: &str) -> Option<&str> {
        let lower = raw.to_ascii_lowercase();
        self.rules
            .iter()
            .find(|(needle, _)| lower.contains(needle.as_str()))
            .map(|(_, canon)| canon.as_str())
    }
}

/// Every table the analyzers and policies consult.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBundle {
    pub oui: OuiTable,
    pub ua_rules: UaRuleSet,
    pub domains: DomainOwnershipTable,
    pub geo: GeoTable,
    pub registry: DeviceRegistry,
    pub tls_fingerprints: TlsFingerprintRules,
    pub vendor_aliases: VendorAliases,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn attrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn vendor_lookup() {
        let mut t = OuiTable::default();
        t.insert(parse_oui_prefix("02:00:00").unwrap(), "TestVendor").unwrap();
        let mac: MacAddr = "02:00:00:00:00:07".parse().unwrap();
        assert_eq!(t.lookup_vendor(mac).vendor, Some("TestVendor"));
        assert_eq!(t.lookup_vendor(mac), t.lookup_vendor(mac));
        let other: MacAddr = "AA:BB:CC:00:00:01".parse().unwrap();
        let empty = OuiTable::default();
        let r = empty.lookup_vendor(other);
        assert_eq!(r.vendor, None);
        assert!(r.local_admin);
        let r = t.lookup_vendor("00:1b:00:00:00:01".parse().unwrap());
        assert_eq!(
            r,
            VendorLookup {
                vendor: None,
                local_admin: false
            }
        );
        assert!(t.insert(parse_oui_prefix("02-00-00").unwrap(), "Dup").is_err());
        assert!(t.insert([1, 2, 3], " ").is_err());
        assert!(parse_oui_prefix("02:00").is_err());
    }

    #[test]
    fn user_agent_first_match_wins() {
        let mut rs = UaRuleSet::default();
        rs.push("printer", "LaserJet", attrs(&[("device_type", "printer")]))
            .unwrap();
        rs.push("generic", "Jet", attrs(&[("device_type", "other")])).unwrap();
        let m = rs.match_user_agent("LaserJet/2.1").unwrap();
        assert_eq!(m.rule_id, "printer");
        assert_eq!(m.attrs["device_type"], "printer");
        assert_eq!(rs.match_user_agent("SkyJet").unwrap().rule_id, "generic");
        assert_eq!(rs.match_user_agent(""), None);
        assert!(matches!(
            rs.push("bad", "([", BTreeMap::new()),
            Err(KnowledgeError::BadPattern { .. })
        ));
        assert!(matches!(
            rs.push("printer", "x", BTreeMap::new()),
            Err(KnowledgeError::Duplicate(_))
        ));
        assert_eq!(rs.len(), 2);
    }

    fn owner(org: &str) -> DomainOwner {
        DomainOwner {
            org: org.to_string(),
            country: None,
        }
    }

    #[test]
    fn domain_longest_suffix_on_label_boundary() {
        let mut t = DomainOwnershipTable::default();
        t.insert("vendor.com", owner("AcmeCorp")).unwrap();
        assert_eq!(t.lookup_domain_owner("api.vendor.com").unwrap().org, "AcmeCorp");
        assert_eq!(t.lookup_domain_owner("API.Vendor.COM.").unwrap().org, "AcmeCorp");
        assert!(t.lookup_domain_owner("vendor.org").is_none());
        assert!(t.lookup_domain_owner("dor.com").is_none());
        assert!(t.lookup_domain_owner("myvendor.com").is_none());

        let mut t = DomainOwnershipTable::default();
        t.insert("com", owner("X")).unwrap();
        t.insert("vendor.com", owner("Y")).unwrap();
        assert_eq!(t.lookup_domain_owner("a.vendor.com").unwrap().org, "Y");
        assert_eq!(t.lookup_domain_owner("other.com").unwrap().org, "X");
    }

    #[test]
    fn suffix_helper() {
        assert!(domain_has_suffix("a.b.com", "b.com"));
        assert!(domain_has_suffix("b.com", "b.com"));
        assert!(!domain_has_suffix("ab.com", "b.com"));
        assert!(!domain_has_suffix("b.com", ""));
    }

    #[test]
    fn geo_longest_prefix() {
        let mut g = GeoTable::default();
        assert_eq!(g.lookup_geo(Ipv4Addr::new(1, 1, 1, 1)), None);
        g.insert("93.184.0.0/16".parse().unwrap(), "US").unwrap();
        assert_eq!(g.lookup_geo(Ipv4Addr::new(93, 184, 216, 34)), Some("US"));
        g.insert("10.0.0.0/8".parse().unwrap(), "AA").unwrap();
        g.insert("10.1.0.0/16".parse().unwrap(), "BB").unwrap();
        assert_eq!(g.lookup_geo(Ipv4Addr::new(10, 1, 2, 3)), Some("BB"));
        assert_eq!(g.lookup_geo(Ipv4Addr::new(10, 2, 2, 3)), Some("AA"));
        assert!("10.0.0.0/33".parse::<Ipv4Cidr>().is_err());
        assert_eq!("10.9.9.9/8".parse::<Ipv4Cidr>().unwrap().to_string(), "10.0.0.0/8");
        assert!(g.insert("1.0.0.0/8".parse().unwrap(), "USA").is_err());
    }

    #[test]
    fn registry_and_persons() {
        let mut r = DeviceRegistry::default();
        let e = |owner: Option<&str>, id: &str| RegistryEntry {
            owner: owner.map(str::to_string),
            device_id: id.to_string(),
            device_class: "laptop".to_string(),
            authorized: true,
        };
        let a = MacAddr::new(0, 1, 2, 3, 4, 5);
        r.insert(a, e(Some("alice"), "L1")).unwrap();
        r.insert(MacAddr::new(0, 1, 2, 3, 4, 6), e(Some("alice"), "P1"))
            .unwrap();
        r.insert(MacAddr::new(0, 1, 2, 3, 4, 7), e(None, "CAM")).unwrap();
        assert_eq!(r.lookup_registration(a).unwrap().device_id, "L1");
        assert_eq!(r.lookup_registration(a), r.lookup_registration(a));
        assert!(r.lookup_registration(MacAddr::ZERO).is_none());
        assert_eq!(r.persons().into_iter().collect::<Vec<_>>(), vec!["alice"]);
        assert!(r.insert(a, e(None, "X")).is_err());
    }

    #[test]
    fn vendor_aliases_and_fingerprints() {
        let mut v = VendorAliases::default();
        v.push("android", "Google").unwrap();
        v.push("acme", "Acme").unwrap();
        assert_eq!(v.normalize("android-dhcp-13"), Some("Google"));
        assert_eq!(v.normalize("ACME firmware"), Some("Acme"));
        assert_eq!(v.normalize("other"), None);
        let mut f = TlsFingerprintRules::default();
        f.insert("1301-1302", "toy-stack-1").unwrap();
        assert_eq!(f.lookup("1301-1302"), Some("toy-stack-1"));
        assert_eq!(f.lookup("1302-1301"), None);
    }

    proptest! {
        #[test]
        fn geo_matches_brute_force(
            entries in proptest::collection::vec((any::<u32>(), 0u8..=32, 0usize..4), 0..30),
            probes in proptest::collection::vec(any::<u32>(), 1..30),
        ) {
            let countries = ["AA", "BB", "CC", "DD"];
            let mut g = GeoTable::default();
            let mut kept: Vec<(Ipv4Cidr, &str)> = Vec::new();
            for (addr, len, c) in entries {
                // bias toward overlaps by sharing the top byte
                let addr = (addr & 0x00ff_ffff) | 0x0a00_0000;
                let cidr = Ipv4Cidr::new(Ipv4Addr::from(addr), len).unwrap();
                if g.insert(cidr, countries[c]).is_ok() {
                    kept.push((cidr, countries[c]));
                }
            }
            for p in probes {
                let ip = Ipv4Addr::from((p & 0x00ff_ffff) | 0x0a00_0000);
                let oracle = kept
                    .iter()
                    .filter(|(c, _)| c.contains(ip))
                    .max_by_key(|(c, _)| c.prefix_len())
                    .map(|(_, c)| *c);
                prop_assert_eq!(g.lookup_geo(ip), oracle);
            }
        }

        #[test]
        fn domain_matches_brute_force(
            entries in proptest::collection::vec(proptest::collection::vec(0usize..4, 1..4), 0..12),
            probes in proptest::collection::vec(proptest::collection::vec(0usize..4, 1..5), 1..20),
        ) {
            let words = ["a", "b", "ab", "com"];
            let join = |v: &Vec<usize>| v.iter().map(|i| words[*i]).collect::<Vec<_>>().join(".");
            let mut t = DomainOwnershipTable::default();
            let mut kept: Vec<(String, String)> = Vec::new();
            for (i, e) in entries.iter().enumerate() {
                let suffix = join(e);
                let org = alloc::format!("org{i}");
                if t.insert(&suffix, owner(&org)).is_ok() {
                    kept.push((suffix, org));
                }
            }
            for p in probes {
                let name = join(&p);
                let oracle = kept
                    .iter()
                    .filter(|(s, _)| domain_has_suffix(&name, s))
                    .max_by_key(|(s, _)| s.len())
                    .map(|(_, o)| o.clone());
                prop_assert_eq!(t.lookup_domain_owner(&name).map(|o| o.org.clone()), oracle);
            }
        }
    }
}
