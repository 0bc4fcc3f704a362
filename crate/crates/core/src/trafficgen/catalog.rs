//! Fixed fictional world the generator draws from: vendors, organizations,
//! address blocks and persona fingerprints, plus the knowledge tables that
//! describe them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use super::scenario::{Persona, Scenario};
use crate::knowledge::{parse_oui_prefix, DomainOwner, Ipv4Cidr, KnowledgeBundle, KnowledgeError, RegistryEntry};
use crate::MacAddr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vendor {
    pub name: &'static str,
    pub oui: [u8; 3],
    pub domain: &'static str,
    pub country: &'static str,
    pub dhcp_class: &'static str,
}

pub const VENDORS: [Vendor; 7] = [
    Vendor {
        name: "Acme",
        oui: [0x00, 0x1a, 0x11],
        domain: "acme-cloud.example",
        country: "US",
        dhcp_class: "acme-embedded 2.0",
    },
    Vendor {
        name: "Globex",
        oui: [0x00, 0x1b, 0x22],
        domain: "globex-print.example",
        country: "DE",
        dhcp_class: "globex-jetdirect 1.1",
    },
    Vendor {
        name: "Initech",
        oui: [0x00, 0x1c, 0x33],
        domain: "initech.example",
        country: "US",
        dhcp_class: "initech-dhcp 4.2",
    },
    Vendor {
        name: "Umbrella",
        oui: [0x00, 0x1d, 0x44],
        domain: "umbrella-mobile.example",
        country: "JP",
        dhcp_class: "umbrella-os 9",
    },
    Vendor {
        name: "Stark",
        oui: [0x00, 0x1e, 0x55],
        domain: "stark.example",
        country: "US",
        dhcp_class: "stark-netos 3",
    },
    Vendor {
        name: "Wayne",
        oui: [0x00, 0x1f, 0x66],
        domain: "wayne-iot.example",
        country: "BR",
        dhcp_class: "wayne-sense 1.0",
    },
    Vendor {
        name: "Soylent",
        oui: [0x00, 0x20, 0x77],
        domain: "soylent.example",
        country: "FR",
        dhcp_class: "soylent-client",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Org {
    pub name: &'static str,
    pub domain: &'static str,
    pub country: &'static str,
}

/// Sites workstations and phones browse.
pub const BROWSE_ORGS: [Org; 8] = [
    Org {
        name: "SearchCo",
        domain: "search.example",
        country: "US",
    },
    Org {
        name: "NewsDaily",
        domain: "newsdaily.example",
        country: "US",
    },
    Org {
        name: "StreamFlix",
        domain: "streamflix.example",
        country: "US",
    },
    Org {
        name: "SocialHub",
        domain: "socialhub.example",
        country: "DE",
    },
    Org {
        name: "ShopMart",
        domain: "shopmart.example",
        country: "FR",
    },
    Org {
        name: "CodeHost",
        domain: "codehost.example",
        country: "JP",
    },
    Org {
        name: "MailBox",
        domain: "mailbox.example",
        country: "BR",
    },
    Org {
        name: "CloudEdge",
        domain: "cloudedge.example",
        country: "CN",
    },
];

pub const TIMESYNC: Org = Org {
    name: "TimeSync",
    domain: "pool.timesync.example",
    country: "DE",
};
pub const CASINO: Org = Org {
    name: "CasinoRoyale",
    domain: "casino-royale.example",
    country: "RU",
};

/// Country → /16 block.
pub const GEO_BLOCKS: [(&str, [u8; 2]); 7] = [
    ("US", [23, 10]),
    ("DE", [31, 20]),
    ("FR", [37, 30]),
    ("JP", [43, 40]),
    ("BR", [45, 50]),
    ("CN", [49, 60]),
    ("RU", [53, 70]),
];

pub const GATEWAY_BEACON_PORT: u16 = 5678;
pub const TELEMETRY_PORT: u16 = 5683;
pub const STREAM_PORT: u16 = 8554;
pub const NTP_PORT: u16 = 123;

pub fn vendor(name: &str) -> Option<&'static Vendor> {
    VENDORS.iter().find(|v| v.name == name)
}

/// Every domain with a fixed address, owner and country.
pub fn all_orgs() -> Vec<Org> {
    let mut v: Vec<Org> = VENDORS
        .iter()
        .map(|x| Org {
            name: x.name,
            domain: x.domain,
            country: x.country,
        })
        .collect();
    v.extend(BROWSE_ORGS);
    v.push(TIMESYNC);
    v.push(CASINO);
    v
}

pub fn org_of_domain(domain: &str) -> Option<Org> {
    all_orgs().into_iter().find(|o| o.domain == domain)
}

/// Fixed server address of a catalog domain, inside its country block.
pub fn domain_ip(domain: &str) -> Option<Ipv4Addr> {
    let orgs = all_orgs();
    let i = orgs.iter().position(|o| o.domain == domain)?;
    let block = country_block(orgs[i].country)?;
    Some(Ipv4Addr::new(block[0], block[1], 0, 10 + i as u8))
}

fn country_block(cc: &str) -> Option<[u8; 2]> {
    GEO_BLOCKS.iter().find(|(c, _)| *c == cc).map(|(_, b)| *b)
}

pub fn country_of(ip: Ipv4Addr) -> Option<&'static str> {
    let o = ip.octets();
    GEO_BLOCKS
        .iter()
        .find(|(_, b)| b[0] == o[0] && b[1] == o[1])
        .map(|(c, _)| *c)
}

pub fn org_ca(org: &str) -> String {
    format!("{org} Root CA")
}

/// Per-persona fingerprints.
#[derive(Debug, Clone, Copy)]
pub struct PersonaTraits {
    pub user_agent: Option<&'static str>,
    pub suites: Option<&'static [u16]>,
    pub stack: Option<&'static str>,
    pub device_class: &'static str,
    pub iot: bool,
}

pub const WORKSTATION_SUITES: [u16; 7] = [0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f, 0xc02c, 0xc030];
pub const PHONE_SUITES: [u16; 4] = [0x1301, 0x1303, 0x1302, 0xc02b];
pub const CAMERA_SUITES: [u16; 3] = [0xc02f, 0x009c, 0x002f];

pub fn traits(p: Persona) -> PersonaTraits {
    let t = |user_agent, suites, stack, device_class, iot| PersonaTraits {
        user_agent,
        suites,
        stack,
        device_class,
        iot,
    };
    match p {
        Persona::Workstation => t(
            Some("Mozilla/5.0 (Windowpane 11; x64) NetBrowse/118.0"),
            Some(&WORKSTATION_SUITES[..]),
            Some("NetBrowse TLS"),
            "workstation",
            false,
        ),
        Persona::PhoneDualUse => t(
            Some("Mozilla/5.0 (PocketOS 9; Mobile) NetBrowse/118.0 Mobile"),
            Some(&PHONE_SUITES[..]),
            Some("PocketOS TLS"),
            "phone",
            false,
        ),
        Persona::IoTCamera => t(
            Some("IPCam-Firmware/3.2"),
            Some(&CAMERA_SUITES[..]),
            Some("EmbedTLS"),
            "camera",
            true,
        ),
        Persona::Printer => t(Some("PrintJet/2.1"), None, None, "printer", true),
        Persona::SmartSensor => t(None, None, None, "sensor", true),
        Persona::Gateway => t(None, None, None, "gateway", false),
        Persona::Server => t(None, None, None, "server", false),
    }
}

/// Attributes the signature rule for each persona user agent yields.
pub fn ua_attributes(p: Persona) -> BTreeMap<String, String> {
    let pairs: &[(&str, &str)] = match p {
        Persona::Workstation => &[
            ("device_type", "workstation"),
            ("os", "Windowpane"),
            ("browser", "NetBrowse"),
        ],
        Persona::PhoneDualUse => &[("device_type", "phone"), ("os", "PocketOS"), ("browser", "NetBrowse")],
        Persona::IoTCamera => &[("device_type", "camera")],
        Persona::Printer => &[("device_type", "printer")],
        _ => &[],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UaRuleSpec {
    pub rule_id: String,
    pub pattern: String,
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrySpec {
    pub mac: MacAddr,
    pub owner: Option<String>,
    pub device_id: String,
    pub device_class: String,
    pub authorized: bool,
}

/// Knowledge tables in file-row form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeSpec {
    /// `(prefix, vendor)`
    pub oui: Vec<(String, String)>,
    pub ua_rules: Vec<UaRuleSpec>,
    /// `(suffix, org, country)`
    pub domain_owners: Vec<(String, String, Option<String>)>,
    /// `(cidr, country)`
    pub geo: Vec<(String, String)>,
    pub registry: Vec<RegistrySpec>,
    /// `(fingerprint, stack)`
    pub tls_fingerprints: Vec<(String, String)>,
    /// `(raw substring, canonical vendor)`
    pub vendor_aliases: Vec<(String, String)>,
}

impl KnowledgeSpec {
    pub fn to_bundle(&self) -> Result<KnowledgeBundle, KnowledgeError> {
        let mut k = KnowledgeBundle::default();
        for (prefix, v) in &self.oui {
            k.oui.insert(parse_oui_prefix(prefix)?, v)?;
        }
        for r in &self.ua_rules {
            k.ua_rules.push(&r.rule_id, &r.pattern, r.attrs.clone())?;
        }
        for (suffix, org, country) in &self.domain_owners {
            k.domains.insert(
                suffix,
                DomainOwner {
                    org: org.clone(),
                    country: country.clone(),
                },
            )?;
        }
        for (cidr, cc) in &self.geo {
            let c: Ipv4Cidr = cidr.parse()?;
            k.geo.insert(c, cc)?;
        }
        for r in &self.registry {
            k.registry.insert(
                r.mac,
                RegistryEntry {
                    owner: r.owner.clone(),
                    device_id: r.device_id.clone(),
                    device_class: r.device_class.clone(),
                    authorized: r.authorized,
                },
            )?;
        }
        for (fp, stack) in &self.tls_fingerprints {
            k.tls_fingerprints.insert(fp, stack)?;
        }
        for (raw, canon) in &self.vendor_aliases {
            k.vendor_aliases.push(raw, canon)?;
        }
        Ok(k)
    }
}

fn fingerprint(suites: &[u16]) -> String {
    suites.iter().map(|s| format!("{s:04x}")).collect::<Vec<_>>().join("-")
}

/// Catalog tables plus a registry entry for every registered device.
pub fn knowledge_for(scenario: &Scenario) -> KnowledgeSpec {
    let mut k = KnowledgeSpec::default();
    for v in VENDORS {
        k.oui.push((
            format!("{:02x}:{:02x}:{:02x}", v.oui[0], v.oui[1], v.oui[2]),
            v.name.into(),
        ));
        k.vendor_aliases.push((v.name.to_ascii_lowercase(), v.name.into()));
    }
    for p in [
        Persona::PhoneDualUse,
        Persona::Workstation,
        Persona::IoTCamera,
        Persona::Printer,
    ] {
        let ua = traits(p).user_agent.expect("persona has a user agent");
        let token = ua
            .split(['/', ' ', '(', ';'])
            .find(|t| matches!(*t, "PocketOS" | "Windowpane" | "IPCam-Firmware" | "PrintJet"));
        k.ua_rules.push(UaRuleSpec {
            rule_id: traits(p).device_class.into(),
            pattern: token.expect("signature token").into(),
            attrs: ua_attributes(p),
        });
    }
    for o in all_orgs() {
        k.domain_owners
            .push((o.domain.into(), o.name.into(), Some(o.country.into())));
    }
    for (cc, b) in GEO_BLOCKS {
        k.geo.push((format!("{}.{}.0.0/16", b[0], b[1]), cc.into()));
    }
    for p in [Persona::Workstation, Persona::PhoneDualUse, Persona::IoTCamera] {
        let t = traits(p);
        k.tls_fingerprints
            .push((fingerprint(t.suites.expect("suites")), t.stack.expect("stack").into()));
    }
    for d in scenario.devices.iter().filter(|d| d.registered) {
        k.registry.push(RegistrySpec {
            mac: d.mac,
            owner: d.owner.clone(),
            device_id: d.id.clone(),
            device_class: traits(d.persona).device_class.into(),
            authorized: d.authorized,
        });
    }
    k
}
