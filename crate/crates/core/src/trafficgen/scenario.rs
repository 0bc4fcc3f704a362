use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{self, BROWSE_ORGS, CASINO, VENDORS};
use crate::policy::{rules_from_specs, PolicyParams, PolicySpec};
use crate::MacAddr;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SNAP_LENGTH: u32 = 65535;
/// 2024-01-15 08:30:00 UTC
pub const DEFAULT_START: u32 = 1_705_307_400;
pub const GATEWAY_IP: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 1);
pub const NTP_IP: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Persona {
    Workstation,
    IoTCamera,
    Printer,
    PhoneDualUse,
    /// Low-rate telemetry device.
    SmartSensor,
    /// Router, DNS resolver and DHCP server; always on.
    Gateway,
    /// Internal NTP server; always on.
    Server,
}

impl Persona {
    pub fn is_infrastructure(self) -> bool {
        matches!(self, Persona::Gateway | Persona::Server)
    }

    pub fn default_pattern(self) -> Pattern {
        match self {
            Persona::Workstation => Pattern::Browse { mean_gap_secs: 90 },
            Persona::PhoneDualUse => Pattern::Dual,
            Persona::IoTCamera => Pattern::Stream,
            Persona::Printer => Pattern::Beacon { period_secs: 60 },
            Persona::SmartSensor => Pattern::Quiet,
            Persona::Gateway | Persona::Server => Pattern::Persona,
        }
    }
}

/// Traffic shape of an activity block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Pattern {
    /// The persona's default.
    #[default]
    Persona,
    /// DNS lookups followed by HTTPS/HTTP fetches at jittered intervals.
    Browse { mean_gap_secs: u32 },
    /// Alternating 20-minute browse and 30 s controller-heartbeat segments.
    Dual,
    /// One long high-rate upload to the vendor cloud.
    Stream,
    /// Fixed-phase check-ins every `period_secs`.
    Beacon { period_secs: u32 },
    /// Rare, irregular telemetry.
    Quiet,
}

impl Pattern {
    /// Behavior mode the pattern is built to exhibit.
    pub fn behavior_label(self) -> Option<&'static str> {
        match self {
            Pattern::Stream => Some("streaming"),
            Pattern::Beacon { .. } => Some("periodic_beacon"),
            Pattern::Quiet => Some("idle"),
            _ => None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_snap() -> u32 {
    DEFAULT_SNAP_LENGTH
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub mac: MacAddr,
    pub persona: Persona,
    /// Catalog vendor name.
    pub vendor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    pub dhcp: bool,
    /// Static address, or the address the DHCP server hands out.
    pub ip: Ipv4Addr,
    /// Listed in the device registry.
    #[serde(default = "yes")]
    pub registered: bool,
    #[serde(default = "yes")]
    pub authorized: bool,
    /// Extra catalog domains fetched once per activity block.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub visits: Vec<String>,
}

/// `[start, end)` in seconds from the scenario start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityBlock {
    pub device: String,
    pub start: u32,
    pub end: u32,
    #[serde(default)]
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Unix seconds of the first packet.
    pub start: u32,
    pub duration_secs: u32,
    #[serde(default = "default_snap")]
    pub snap_length: u32,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub timeline: Vec<ActivityBlock>,
    /// Rules whose violations the sidecar plants.
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn invalid(reason: String) -> ScenarioError {
    ScenarioError::InvalidScenario(reason)
}

impl Scenario {
    pub fn empty(name: &str) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            start: DEFAULT_START,
            duration_secs: 0,
            snap_length: DEFAULT_SNAP_LENGTH,
            devices: Vec::new(),
            timeline: Vec::new(),
            policies: Vec::new(),
        }
    }

    pub fn device(&self, id: &str) -> Option<&DeviceSpec> {
        self.devices.iter().find(|d| d.id == id)
    }

    /// Blocks of one device with persona defaults substituted.
    pub fn blocks_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = (u32, u32, Pattern)> + 'a {
        let persona = self.device(id).map(|d| d.persona);
        self.timeline.iter().filter(move |b| b.device == id).map(move |b| {
            let p = match (b.pattern, persona) {
                (Pattern::Persona, Some(p)) => p.default_pattern(),
                (p, _) => p,
            };
            (b.start, b.end, p)
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.snap_length < 128 {
            return Err(invalid(format!("snap_length {} is below 128", self.snap_length)));
        }
        if self.start.checked_add(self.duration_secs).is_none() {
            return Err(invalid("start + duration overflows".into()));
        }
        let mut ids = BTreeSet::new();
        let mut macs = BTreeSet::new();
        for d in &self.devices {
            if d.id.trim().is_empty() {
                return Err(invalid("empty device id".into()));
            }
            if !ids.insert(d.id.as_str()) {
                return Err(invalid(format!("duplicate device id {:?}", d.id)));
            }
            if !macs.insert(d.mac) {
                return Err(invalid(format!("duplicate MAC {}", d.mac)));
            }
            if d.mac.is_multicast() || d.mac == MacAddr::ZERO {
                return Err(invalid(format!("device {:?} needs a unicast MAC", d.id)));
            }
            if catalog::vendor(&d.vendor).is_none() {
                return Err(invalid(format!("device {:?}: unknown vendor {:?}", d.id, d.vendor)));
            }
            let o = d.ip.octets();
            if o[..3] != [10, 0, 0] || o[3] == 0 || o[3] == 255 {
                return Err(invalid(format!(
                    "device {:?}: address {} outside 10.0.0.1-254",
                    d.id, d.ip
                )));
            }
            if d.owner.as_deref().is_some_and(|o| o.trim().is_empty()) {
                return Err(invalid(format!("device {:?}: empty owner", d.id)));
            }
            if d.persona.is_infrastructure() && d.dhcp {
                return Err(invalid(format!("device {:?}: infrastructure must be static", d.id)));
            }
            if let Some(v) = d.visits.iter().find(|v| catalog::domain_ip(v).is_none()) {
                return Err(invalid(format!("device {:?}: unknown visit domain {v:?}", d.id)));
            }
        }
        let gateways = self.devices.iter().filter(|d| d.persona == Persona::Gateway).count();
        if !self.devices.is_empty() && gateways != 1 {
            return Err(invalid(format!("need exactly one Gateway device, found {gateways}")));
        }
        for b in &self.timeline {
            let Some(d) = self.device(&b.device) else {
                return Err(invalid(format!("block names unknown device {:?}", b.device)));
            };
            if d.persona.is_infrastructure() {
                return Err(invalid(format!(
                    "infrastructure device {:?} takes no activity blocks",
                    d.id
                )));
            }
            if b.end < b.start + 10 || b.end > self.duration_secs {
                return Err(invalid(format!(
                    "block {}..{} of {:?} must last at least 10 s and end within the duration",
                    b.start, b.end, b.device
                )));
            }
            match b.pattern {
                Pattern::Browse { mean_gap_secs } if mean_gap_secs < 10 => {
                    return Err(invalid("browse gap below 10 s".into()))
                }
                Pattern::Beacon { period_secs } if period_secs < 10 => {
                    return Err(invalid("beacon period below 10 s".into()))
                }
                _ => {}
            }
        }
        // address sharing: only leased addresses, never at the same time
        let mut by_ip: BTreeMap<Ipv4Addr, Vec<&DeviceSpec>> = BTreeMap::new();
        for d in &self.devices {
            by_ip.entry(d.ip).or_default().push(d);
        }
        for (ip, devs) in &by_ip {
            if devs.len() > 1 && devs.iter().any(|d| !d.dhcp) {
                return Err(invalid(format!("static address {ip} is shared")));
            }
            let mut spans: Vec<(u32, u32, &str)> = devs
                .iter()
                .flat_map(|d| {
                    self.timeline
                        .iter()
                        .filter(|b| b.device == d.id)
                        .map(|b| (b.start, b.end, b.device.as_str()))
                })
                .collect();
            spans.sort();
            for w in spans.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(invalid(format!(
                        "blocks of {:?} and {:?} overlap on {ip}",
                        w[0].2, w[1].2
                    )));
                }
            }
        }
        rules_from_specs(&self.policies).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// bundled and randomized scenarios

fn mac_for(vendor: &str, n: u8) -> MacAddr {
    let v = catalog::vendor(vendor).expect("catalog vendor");
    MacAddr::new(v.oui[0], v.oui[1], v.oui[2], 0x00, 0x10, n)
}

fn dev(id: &str, persona: Persona, vendor: &str, n: u8, ip: u8, dhcp: bool, owner: Option<&str>) -> DeviceSpec {
    DeviceSpec {
        id: id.into(),
        mac: mac_for(vendor, n),
        persona,
        vendor: vendor.into(),
        owner: owner.map(Into::into),
        dhcp,
        ip: Ipv4Addr::new(10, 0, 0, ip),
        registered: true,
        authorized: true,
        visits: Vec::new(),
    }
}

fn infra() -> Vec<DeviceSpec> {
    vec![
        dev("gateway", Persona::Gateway, "Stark", 1, 1, false, None),
        dev("ntp", Persona::Server, "Initech", 3, 3, false, None),
    ]
}

fn block(device: &str, start: u32, end: u32) -> ActivityBlock {
    ActivityBlock {
        device: device.into(),
        start,
        end,
        pattern: Pattern::Persona,
    }
}

/// Nine-hour office morning-to-evening capture: four people with a
/// workstation each and two phones, two cameras, a printer, an unregistered
/// laptop, a gateway and an NTP server. Two violations are planted: the
/// unregistered laptop and a casino lookup.
pub fn office_small() -> Scenario {
    let mut devices = infra();
    let people = ["alice", "bob", "carol", "dave"];
    let ws_vendors = ["Initech", "Initech", "Stark", "Soylent"];
    for (i, (p, v)) in people.iter().zip(ws_vendors).enumerate() {
        let mut d = dev(
            &format!("{p}-ws"),
            Persona::Workstation,
            v,
            20 + i as u8,
            100 + i as u8,
            true,
            Some(p),
        );
        if *p == "dave" {
            d.visits.push(CASINO.domain.into());
        }
        devices.push(d);
    }
    devices.push(dev(
        "alice-phone",
        Persona::PhoneDualUse,
        "Umbrella",
        30,
        110,
        true,
        Some("alice"),
    ));
    devices.push(dev(
        "bob-phone",
        Persona::PhoneDualUse,
        "Umbrella",
        31,
        111,
        true,
        Some("bob"),
    ));
    devices.push(dev("lobby-cam", Persona::IoTCamera, "Acme", 40, 120, true, None));
    devices.push(dev("dock-cam", Persona::IoTCamera, "Acme", 41, 121, true, None));
    devices.push(dev("printer", Persona::Printer, "Globex", 50, 20, false, None));
    let mut rogue = dev("guest-laptop", Persona::Workstation, "Soylent", 60, 130, true, None);
    rogue.registered = false;
    devices.push(rogue);

    let h = 3600;
    let mut timeline = vec![
        block("alice-ws", 1800, 8 * h + 1800),
        block("bob-ws", 1800 + 600, 7 * h),
        block("carol-ws", h, 8 * h),
        block("dave-ws", 1800, 4 * h + 1800),
        block("dave-ws", 5 * h, 8 * h + 1800),
        block("alice-phone", 1800, 8 * h + 1800),
        block("bob-phone", 2 * h, 6 * h),
        block("lobby-cam", 0, 9 * h),
        block("dock-cam", 0, 9 * h),
        block("printer", 0, 9 * h),
        block("guest-laptop", 3 * h, 4 * h),
    ];
    timeline.sort_by(|a, b| (a.start, &a.device).cmp(&(b.start, &b.device)));
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "office-small".into(),
        start: DEFAULT_START,
        duration_secs: 9 * h,
        snap_length: 1024,
        devices,
        timeline,
        policies: office_small_policies(),
    }
}

/// The policy pack whose violations office-small plants.
pub fn office_small_policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec {
            rule_id: "P1-registered".into(),
            kind: "RequireRegistered".into(),
            ..PolicySpec::default()
        },
        PolicySpec {
            rule_id: "P1-no-gambling".into(),
            kind: "ForbidDomainSuffix".into(),
            params: PolicyParams {
                suffixes: Some(vec![CASINO.domain.into()]),
                ..PolicyParams::default()
            },
        },
    ]
}

/// Families of randomized scenarios, each stressing one analytic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Mixed personas and blocks.
    General,
    /// Leased addresses handed from one device to another.
    Reassignment,
    /// Cameras and printers beside diverse browsers.
    Iot,
    /// Random policy packs with planted offenders.
    Policy,
    /// Many people, multi-device people and empty windows.
    Occupancy,
    /// Whole-capture beacon, stream and idle devices.
    Behavior,
}

const BUILD_SALT: u64 = 0x6e65_7473_6967_6874;

struct Builder {
    rng: ChaCha8Rng,
    devices: Vec<DeviceSpec>,
    timeline: Vec<ActivityBlock>,
    next_mac: u8,
    next_dhcp: u8,
    next_static: u8,
    duration: u32,
}

impl Builder {
    fn new(seed: u64, duration: u32, with_ntp: bool) -> Self {
        let mut devices = infra();
        if !with_ntp {
            devices.pop();
        }
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed ^ BUILD_SALT),
            devices,
            timeline: Vec::new(),
            next_mac: 100,
            next_dhcp: 100,
            next_static: 20,
            duration,
        }
    }

    fn vendor_for(&mut self, p: Persona) -> &'static str {
        let pool: &[&str] = match p {
            Persona::Workstation => &["Initech", "Stark", "Soylent"],
            Persona::PhoneDualUse => &["Umbrella"],
            Persona::IoTCamera => &["Acme", "Wayne"],
            Persona::Printer => &["Globex"],
            Persona::SmartSensor => &["Wayne", "Acme"],
            _ => &["Stark"],
        };
        pool[self.rng.gen_range(0..pool.len())]
    }

    /// Adds a device; printers and sensors are static, the rest leased.
    fn add(&mut self, persona: Persona, owner: Option<&str>) -> String {
        let vendor = self.vendor_for(persona);
        let dhcp = !matches!(persona, Persona::Printer);
        let ip = if dhcp {
            self.next_dhcp += 1;
            self.next_dhcp - 1
        } else {
            self.next_static += 1;
            self.next_static - 1
        };
        self.next_mac += 1;
        let id = format!("{}-{}", catalog::traits(persona).device_class, self.devices.len());
        self.devices
            .push(dev(&id, persona, vendor, self.next_mac, ip, dhcp, owner));
        id
    }

    fn block(&mut self, id: &str, start: u32, end: u32, pattern: Pattern) {
        self.timeline.push(ActivityBlock {
            device: id.into(),
            start,
            end,
            pattern,
        });
    }

    /// A random block of at least `min` seconds.
    fn random_block(&mut self, id: &str, min: u32) {
        let len = self.rng.gen_range(min..=self.duration);
        let start = self.rng.gen_range(0..=self.duration - len);
        self.block(id, start, start + len, Pattern::Persona);
    }

    fn finish(mut self, name: String, policies: Vec<PolicySpec>) -> Scenario {
        self.timeline
            .sort_by(|a, b| (a.start, &a.device).cmp(&(b.start, &b.device)));
        Scenario {
            schema_version: SCHEMA_VERSION,
            name,
            start: DEFAULT_START + self.rng.gen_range(0..86_400),
            duration_secs: self.duration,
            snap_length: 1024,
            devices: self.devices,
            timeline: self.timeline,
            policies,
        }
    }
}

/// Deterministic randomized scenario of the given family.
pub fn random_scenario(kind: ScenarioKind, seed: u64) -> Scenario {
    let name = format!("{kind:?}-{seed}").to_ascii_lowercase();
    match kind {
        ScenarioKind::General => {
            let mut b = Builder::new(seed, 1800, seed % 2 == 0);
            let n = b.rng.gen_range(2..=6);
            let personas = [
                Persona::Workstation,
                Persona::PhoneDualUse,
                Persona::IoTCamera,
                Persona::Printer,
                Persona::SmartSensor,
            ];
            for i in 0..n {
                let p = personas[b.rng.gen_range(0..personas.len())];
                let owner =
                    matches!(p, Persona::Workstation | Persona::PhoneDualUse).then(|| format!("person{}", i % 3));
                let id = b.add(p, owner.as_deref());
                b.random_block(&id, 300);
            }
            b.finish(name, Vec::new())
        }
        ScenarioKind::Reassignment => {
            let mut b = Builder::new(seed, 1800, false);
            let rounds = b.rng.gen_range(2..=4usize);
            let mut t = 0u32;
            let shared_ip = 150u8;
            let mut vendors: Vec<&str> = VENDORS.iter().map(|v| v.name).collect();
            vendors.shuffle(&mut b.rng);
            let slot = (b.duration - 60) / rounds as u32;
            for (r, vendor) in vendors.iter().take(rounds).enumerate() {
                let persona = if r % 2 == 0 {
                    Persona::Workstation
                } else {
                    Persona::IoTCamera
                };
                b.next_mac += 1;
                let id = format!("lease-{r}");
                let mut d = dev(&id, persona, vendor, b.next_mac, shared_ip, true, None);
                d.id = id.clone();
                b.devices.push(d);
                let len = b.rng.gen_range(slot / 2..slot - 20);
                b.block(&id, t, t + len, Pattern::Persona);
                t += slot;
            }
            // a bystander on its own lease
            let id = b.add(Persona::Workstation, Some("bystander"));
            b.block(&id, 0, b.duration, Pattern::Persona);
            b.finish(name, Vec::new())
        }
        ScenarioKind::Iot => {
            let mut b = Builder::new(seed, 3600, true);
            let (iot, other) = (b.rng.gen_range(1..=3), b.rng.gen_range(1..=3));
            for _ in 0..iot {
                let p = if b.rng.gen_bool(0.5) {
                    Persona::IoTCamera
                } else {
                    Persona::Printer
                };
                let id = b.add(p, None);
                let d = b.duration;
                b.block(&id, 0, d, Pattern::Persona);
            }
            for i in 0..other {
                let id = b.add(Persona::Workstation, Some(&format!("person{i}")));
                b.random_block(&id, 1800);
            }
            b.finish(name, Vec::new())
        }
        ScenarioKind::Policy => {
            let mut b = Builder::new(seed, 1800, true);
            let n = b.rng.gen_range(3..=6);
            let personas = [
                Persona::Workstation,
                Persona::PhoneDualUse,
                Persona::IoTCamera,
                Persona::Printer,
            ];
            for i in 0..n {
                let p = personas[b.rng.gen_range(0..personas.len())];
                let id = b.add(p, Some(&format!("person{i}")));
                b.random_block(&id, 300);
                let d = b.devices.last_mut().expect("just added");
                if b.rng.gen_bool(0.25) {
                    d.registered = false;
                } else if b.rng.gen_bool(0.2) {
                    d.authorized = false;
                }
                if b.rng.gen_bool(0.3) {
                    d.visits.push(CASINO.domain.into());
                }
            }
            let mut policies = Vec::new();
            let kinds = [
                "RequireRegistered",
                "RequireEncrypted",
                "ForbidDeviceClass",
                "ForbidDestGeo",
                "ForbidDomainSuffix",
            ];
            for (i, kind) in kinds.iter().enumerate() {
                if !b.rng.gen_bool(0.7) {
                    continue;
                }
                let mut spec = PolicySpec {
                    rule_id: format!("R{i}-{}", kind.to_ascii_lowercase()),
                    kind: (*kind).into(),
                    ..PolicySpec::default()
                };
                match *kind {
                    "ForbidDeviceClass" => {
                        let classes = ["printer", "camera", "phone", "workstation"];
                        spec.params.class = Some(classes[b.rng.gen_range(0..classes.len())].into());
                    }
                    "ForbidDestGeo" => {
                        let mut cs: Vec<String> = ["CN", "RU", "BR", "JP"]
                            .iter()
                            .filter(|_| b.rng.gen_bool(0.4))
                            .map(|c| c.to_string())
                            .collect();
                        if cs.is_empty() {
                            cs.push("CN".into());
                        }
                        spec.params.countries = Some(cs);
                    }
                    "ForbidDomainSuffix" => {
                        let mut s = vec![CASINO.domain.to_string()];
                        if b.rng.gen_bool(0.5) {
                            s.push(BROWSE_ORGS[b.rng.gen_range(0..BROWSE_ORGS.len())].domain.into());
                        }
                        spec.params.suffixes = Some(s);
                    }
                    _ => {}
                }
                policies.push(spec);
            }
            b.finish(name, policies)
        }
        ScenarioKind::Occupancy => {
            let mut b = Builder::new(seed, 4 * 3600, false);
            let persons = b.rng.gen_range(1..=10);
            // a quiet stretch in the middle nobody is around for
            let gap = (b.duration / 2 - 900, b.duration / 2 + 900);
            for i in 0..persons {
                let owner = format!("person{i}");
                let n = b.rng.gen_range(1..=3);
                for _ in 0..n {
                    let p = if b.rng.gen_bool(0.5) {
                        Persona::Workstation
                    } else {
                        Persona::PhoneDualUse
                    };
                    let id = b.add(p, Some(&owner));
                    let before = b.rng.gen_bool(0.5);
                    let (lo, hi) = if before { (0, gap.0) } else { (gap.1, b.duration) };
                    let len = b.rng.gen_range(600..=hi - lo);
                    let start = b.rng.gen_range(lo..=hi - len);
                    b.block(&id, start, start + len, Pattern::Persona);
                }
            }
            b.finish(name, Vec::new())
        }
        ScenarioKind::Behavior => {
            let mut b = Builder::new(seed, 3600, false);
            let d = b.duration;
            for p in [Persona::Printer, Persona::IoTCamera, Persona::SmartSensor] {
                let id = b.add(p, None);
                b.block(&id, 0, d, Pattern::Persona);
            }
            let period = [30, 60, 120][b.rng.gen_range(0..3)];
            let id = b.add(Persona::SmartSensor, None);
            b.block(&id, 0, d, Pattern::Beacon { period_secs: period });
            b.finish(name, Vec::new())
        }
    }
}
