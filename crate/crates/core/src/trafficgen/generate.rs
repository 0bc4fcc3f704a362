use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::{self, org_ca, traits, BROWSE_ORGS, TIMESYNC};
use super::scenario::{Pattern, Persona, Scenario, ScenarioError};
use super::sidecar::{
    Adjacency, DeviceLabel, EpochLabel, L2Adjacency, L3Adjacency, OccupancyLabel, Sidecar, ViolationLabel,
};
use super::wire::{self, DhcpMessageSpec, DnsMessageSpec};
use crate::decoders::DhcpMessageType;
use crate::ingest::{write_capture, ByteOrder, CaptureHeader, PacketRecord};
use crate::knowledge::{domain_has_suffix, normalize_domain};
use crate::policy::{rules_from_specs, PolicyKind};
use crate::{MacAddr, Timestamp};

const SEC: u64 = 1_000_000;
const MS: u64 = 1_000;
const TCP_FIN: u8 = 0x01;
const TCP_SYN: u8 = 0x02;
const TCP_PSH: u8 = 0x08;
const TCP_ACK: u8 = 0x10;
const OCCUPANCY_WINDOW: u32 = 900;
/// Default evidence floor of the DNS IoT classifier.
const MIN_IOT_QUERIES: u64 = 5;
/// Device types the default chain maps to IoT.
const IOT_CLASSES: [&str; 5] = ["camera", "sensor", "printer", "thermostat", "speaker"];

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedCapture {
    pub pcap: Vec<u8>,
    /// The records `pcap` holds, in file order.
    pub packets: Vec<PacketRecord>,
    pub sidecar: Sidecar,
}

struct Frame {
    ts: u64,
    order: u64,
    origin: Option<usize>,
    src_mac: MacAddr,
    dst_mac: MacAddr,
    data: Vec<u8>,
    original_len: u32,
}

#[derive(Default)]
struct Facts {
    domains: BTreeSet<String>,
    dns_queries: u64,
    external: BTreeSet<Ipv4Addr>,
    http_ports: BTreeSet<u16>,
    user_agent: bool,
    client_hello: bool,
}

struct DevState {
    eph: u16,
    ident: u16,
    dns_id: u16,
    iot_queries: u64,
    browse_cycle: Vec<&'static str>,
    next_ntp: u64,
}

struct Gen<'a> {
    sc: &'a Scenario,
    rng: ChaCha8Rng,
    t0: u64,
    frames: Vec<Frame>,
    state: Vec<DevState>,
    facts: Vec<Facts>,
    gw: Option<usize>,
    ntp: Option<usize>,
    ext_ident: u16,
    epochs: Vec<(Ipv4Addr, MacAddr, u64)>,
    l3: BTreeMap<(String, String), u64>,
}

/// Writes the capture and labels for `scenario`. Identical inputs give
/// identical bytes.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<GeneratedCapture, ScenarioError> {
    scenario.validate()?;
    let mut g = Gen {
        sc: scenario,
        rng: ChaCha8Rng::seed_from_u64(seed),
        t0: u64::from(scenario.start) * SEC,
        frames: Vec::new(),
        state: scenario
            .devices
            .iter()
            .enumerate()
            .map(|(i, _)| DevState {
                eph: 49152 + (i as u16 * 997) % 8000,
                ident: (i as u16).wrapping_mul(4099),
                dns_id: (i as u16).wrapping_mul(7919),
                iot_queries: 0,
                browse_cycle: Vec::new(),
                next_ntp: 0,
            })
            .collect(),
        facts: scenario.devices.iter().map(|_| Facts::default()).collect(),
        gw: scenario.devices.iter().position(|d| d.persona == Persona::Gateway),
        ntp: scenario.devices.iter().position(|d| d.persona == Persona::Server),
        ext_ident: 1,
        epochs: Vec::new(),
        l3: BTreeMap::new(),
    };
    if g.gw.is_some() {
        g.gateway_beacons();
    }
    for (i, d) in scenario.devices.iter().enumerate() {
        let blocks: Vec<_> = scenario.blocks_of(&d.id).collect();
        for (s, e, p) in blocks {
            g.run_block(i, s, e, p);
        }
    }
    Ok(g.finish(seed))
}

impl Gen<'_> {
    fn mac(&self, d: usize) -> MacAddr {
        self.sc.devices[d].mac
    }

    fn ip(&self, d: usize) -> Ipv4Addr {
        self.sc.devices[d].ip
    }

    fn gw(&self) -> usize {
        self.gw.expect("validated: devices imply a gateway")
    }

    fn vendor_domain(&self, d: usize) -> &'static str {
        catalog::vendor(&self.sc.devices[d].vendor)
            .expect("validated vendor")
            .domain
    }

    fn eph(&mut self, d: usize) -> u16 {
        let s = &mut self.state[d];
        let p = s.eph;
        s.eph = if s.eph == 65535 { 49152 } else { s.eph + 1 };
        p
    }

    fn node(&self, ip: Ipv4Addr) -> String {
        match self.sc.devices.iter().position(|d| d.ip == ip) {
            Some(i) if crate::is_internal_ip(ip) => format!("mac:{}", self.mac(i)),
            _ => format!("ext:{ip}"),
        }
    }

    fn note_flow(&mut self, d: usize, dst: Ipv4Addr) {
        let key = (format!("mac:{}", self.mac(d)), self.node(dst));
        *self.l3.entry(key).or_default() += 1;
        if !crate::is_internal_ip(dst) {
            self.facts[d].external.insert(dst);
        }
    }

    /// Frames one IPv4 packet. `origin` is the internal device that sent it.
    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        ts: u64,
        origin: Option<usize>,
        src_mac: MacAddr,
        dst_mac: MacAddr,
        src_ip: Ipv4Addr,
        dst_ip: Ipv4Addr,
        proto: u8,
        l4: &[u8],
    ) {
        let ident = match origin {
            Some(d) => {
                let s = &mut self.state[d];
                s.ident = s.ident.wrapping_add(1);
                s.ident
            }
            None => {
                self.ext_ident = self.ext_ident.wrapping_add(1);
                self.ext_ident
            }
        };
        let mut data = wire::ethernet_frame(
            src_mac,
            dst_mac,
            0x0800,
            &wire::ipv4_packet(src_ip, dst_ip, proto, ident, l4),
        );
        let original_len = data.len() as u32;
        data.truncate(self.sc.snap_length as usize);
        let order = self.frames.len() as u64;
        self.frames.push(Frame {
            ts,
            order,
            origin,
            src_mac,
            dst_mac,
            data,
            original_len,
        });
    }

    fn gateway_beacons(&mut self) {
        let gw = self.gw();
        let payload = [0x5au8; 32];
        let udp = wire::udp_datagram(catalog::GATEWAY_BEACON_PORT, catalog::GATEWAY_BEACON_PORT, &payload);
        let n = u64::from(self.sc.duration_secs.saturating_sub(1)) / 60;
        for k in 0..=n {
            let (mac, ip) = (self.mac(gw), self.ip(gw));
            self.emit(
                self.t0 + k * 60 * SEC,
                Some(gw),
                mac,
                MacAddr::BROADCAST,
                ip,
                Ipv4Addr::BROADCAST,
                17,
                &udp,
            );
        }
    }

    fn dhcp_handshake(&mut self, d: usize, ts: u64) {
        let gw = self.gw();
        let dev = &self.sc.devices[d];
        let vendor = catalog::vendor(&dev.vendor).expect("validated vendor");
        let xid: u32 = self.rng.gen();
        let msg = |t: DhcpMessageType, yiaddr: Ipv4Addr, client: bool| DhcpMessageSpec {
            msg_type: t,
            xid,
            client_mac: dev.mac,
            yiaddr,
            hostname: client.then(|| dev.id.clone()),
            vendor_class: client.then(|| vendor.dhcp_class.to_string()),
            param_req_list: client.then(|| vec![1, 3, 6, 15]),
        };
        let steps = [
            (DhcpMessageType::Discover, Ipv4Addr::UNSPECIFIED, true),
            (DhcpMessageType::Offer, dev.ip, false),
            (DhcpMessageType::Request, Ipv4Addr::UNSPECIFIED, true),
            (DhcpMessageType::Ack, dev.ip, false),
        ];
        let (mac, gw_mac, gw_ip, ip) = (dev.mac, self.mac(gw), self.ip(gw), dev.ip);
        for (i, (t, yiaddr, client)) in steps.into_iter().enumerate() {
            let body = wire::encode_dhcp(&msg(t, yiaddr, client));
            let at = ts + i as u64 * 5 * MS;
            if client {
                let udp = wire::udp_datagram(68, 67, &body);
                self.emit(
                    at,
                    Some(d),
                    mac,
                    MacAddr::BROADCAST,
                    Ipv4Addr::UNSPECIFIED,
                    Ipv4Addr::BROADCAST,
                    17,
                    &udp,
                );
            } else {
                let udp = wire::udp_datagram(67, 68, &body);
                self.emit(
                    at,
                    Some(gw),
                    gw_mac,
                    MacAddr::BROADCAST,
                    gw_ip,
                    Ipv4Addr::BROADCAST,
                    17,
                    &udp,
                );
            }
            if t == DhcpMessageType::Ack {
                self.epochs.push((ip, mac, at));
            }
        }
    }

    fn dns_query(&mut self, d: usize, ts: u64, name: &str) {
        let gw = self.gw();
        let sport = self.eph(d);
        let id = {
            let s = &mut self.state[d];
            s.dns_id = s.dns_id.wrapping_add(1);
            s.dns_id
        };
        let answer = catalog::domain_ip(name).expect("catalog domain");
        let mut spec = DnsMessageSpec {
            id,
            is_response: false,
            query_name: name.into(),
            qtype: 1,
            answers: vec![(name.into(), answer)],
            compress: true,
        };
        let (mac, ip, gw_mac, gw_ip) = (self.mac(d), self.ip(d), self.mac(gw), self.ip(gw));
        let q = wire::udp_datagram(sport, 53, &wire::encode_dns(&spec));
        self.emit(ts, Some(d), mac, gw_mac, ip, gw_ip, 17, &q);
        spec.is_response = true;
        let r = wire::udp_datagram(53, sport, &wire::encode_dns(&spec));
        self.emit(ts + 2 * MS, Some(gw), gw_mac, mac, gw_ip, ip, 17, &r);
        self.facts[d].domains.insert(name.into());
        self.facts[d].dns_queries += 1;
        self.note_flow(d, gw_ip);
    }

    /// Handshake, one request, one response and an orderly close towards
    /// an external server.
    fn tcp_session(&mut self, d: usize, ts: u64, dst: Ipv4Addr, dport: u16, request: &[u8], response: &[u8]) {
        let gw = self.gw();
        let sport = self.eph(d);
        let (mac, ip, gw_mac) = (self.mac(d), self.ip(d), self.mac(gw));
        let c: u32 = self.rng.gen();
        let s: u32 = self.rng.gen();
        let (n, m) = (request.len() as u32, response.len() as u32);
        let out = |seq: u32, ack: u32, flags: u8, p: &[u8]| wire::tcp_segment(sport, dport, seq, ack, flags, p);
        let back = |seq: u32, ack: u32, flags: u8, p: &[u8]| wire::tcp_segment(dport, sport, seq, ack, flags, p);
        let (c1, s1) = (c.wrapping_add(1), s.wrapping_add(1));
        let (cn, sm) = (c1.wrapping_add(n), s1.wrapping_add(m));
        let steps: [(u64, bool, Vec<u8>); 8] = [
            (0, true, out(c, 0, TCP_SYN, &[])),
            (20, false, back(s, c1, TCP_SYN | TCP_ACK, &[])),
            (40, true, out(c1, s1, TCP_ACK, &[])),
            (41, true, out(c1, s1, TCP_PSH | TCP_ACK, request)),
            (80, false, back(s1, cn, TCP_PSH | TCP_ACK, response)),
            (100, true, out(cn, sm, TCP_FIN | TCP_ACK, &[])),
            (120, false, back(sm, cn.wrapping_add(1), TCP_FIN | TCP_ACK, &[])),
            (121, true, out(cn.wrapping_add(1), sm.wrapping_add(1), TCP_ACK, &[])),
        ];
        for (dt, from_client, seg) in steps {
            if from_client {
                self.emit(ts + dt * MS, Some(d), mac, gw_mac, ip, dst, 6, &seg);
            } else {
                self.emit(ts + dt * MS, None, gw_mac, mac, dst, ip, 6, &seg);
            }
        }
        self.note_flow(d, dst);
    }

    fn https_session(&mut self, d: usize, ts: u64, domain: &str) {
        let suites = traits(self.sc.devices[d].persona).suites.expect("persona speaks TLS");
        let org = catalog::org_of_domain(domain).expect("catalog domain");
        let hello = wire::encode_client_hello(suites, Some(domain));
        let cert = wire::encode_certificate_message(&wire::encode_der_certificate(&org_ca(org.name), domain), true);
        let ip = catalog::domain_ip(domain).expect("catalog domain");
        self.tcp_session(d, ts, ip, 443, &hello, &cert);
        self.facts[d].client_hello = true;
    }

    fn http_session(&mut self, d: usize, ts: u64, domain: &str, method: &str, uri: &str) {
        let ua = traits(self.sc.devices[d].persona).user_agent;
        let req = wire::encode_http_request(method, uri, domain, ua);
        let ip = catalog::domain_ip(domain).expect("catalog domain");
        self.tcp_session(d, ts, ip, 80, &req, b"HTTP/1.1 200 OK\r\nContent-Length: 0\r\n\r\n");
        let f = &mut self.facts[d];
        f.http_ports.insert(80);
        f.user_agent |= ua.is_some();
    }

    /// Lookup then fetch, over TLS when the persona speaks it.
    fn fetch(&mut self, d: usize, ts: u64, domain: &str, prefer_http: bool) {
        self.dns_query(d, ts, domain);
        let t = traits(self.sc.devices[d].persona);
        let at = ts + 10 * MS;
        match (t.suites.is_some(), t.user_agent.is_some()) {
            (true, true) if prefer_http => self.http_session(d, at, domain, "GET", "/"),
            (true, _) => self.https_session(d, at, domain),
            (false, true) => self.http_session(d, at, domain, "GET", "/"),
            (false, false) => self.telemetry(d, at, domain, 40),
        }
    }

    fn telemetry(&mut self, d: usize, ts: u64, domain: &str, len: usize) {
        let gw = self.gw();
        let sport = self.eph(d);
        let dst = catalog::domain_ip(domain).expect("catalog domain");
        let udp = wire::udp_datagram(sport, catalog::TELEMETRY_PORT, &vec![0x40u8; len]);
        let (mac, ip, gw_mac) = (self.mac(d), self.ip(d), self.mac(gw));
        self.emit(ts, Some(d), mac, gw_mac, ip, dst, 17, &udp);
        self.note_flow(d, dst);
    }

    fn ntp_exchange(&mut self, d: usize, ts: u64) {
        let Some(srv) = self.ntp else { return };
        let sport = self.eph(d);
        let (mac, ip, smac, sip) = (self.mac(d), self.ip(d), self.mac(srv), self.ip(srv));
        let mut payload = [0u8; 48];
        payload[0] = 0x23;
        self.emit(
            ts,
            Some(d),
            mac,
            smac,
            ip,
            sip,
            17,
            &wire::udp_datagram(sport, catalog::NTP_PORT, &payload),
        );
        payload[0] = 0x24;
        self.emit(
            ts + MS,
            Some(srv),
            smac,
            mac,
            sip,
            ip,
            17,
            &wire::udp_datagram(catalog::NTP_PORT, sport, &payload),
        );
        self.note_flow(d, sip);
    }

    /// Vendor domain, with every tenth lookup going to the time service.
    fn iot_name(&mut self, d: usize) -> &'static str {
        let s = &mut self.state[d];
        s.iot_queries += 1;
        if s.iot_queries % 10 == 0 {
            TIMESYNC.domain
        } else {
            self.vendor_domain(d)
        }
    }

    /// Round-robin over a reshuffled list so no site dominates.
    fn browse_name(&mut self, d: usize) -> &'static str {
        if self.state[d].browse_cycle.is_empty() {
            let mut c: Vec<&'static str> = BROWSE_ORGS.iter().map(|o| o.domain).collect();
            c.push(self.vendor_domain(d));
            c.shuffle(&mut self.rng);
            self.state[d].browse_cycle = c;
        }
        self.state[d].browse_cycle.pop().expect("refilled")
    }

    fn run_block(&mut self, d: usize, start: u32, end: u32, pattern: Pattern) {
        let s = self.t0 + u64::from(start) * SEC;
        let e = self.t0 + u64::from(end) * SEC;
        if self.sc.devices[d].dhcp {
            self.dhcp_handshake(d, s);
        }
        let mut from = s + SEC;
        let stop = e - 2 * SEC;
        let visits = self.sc.devices[d].visits.clone();
        for v in &visits {
            self.fetch(d, from, v, false);
            from += SEC;
        }
        match pattern {
            Pattern::Persona => unreachable!("resolved by blocks_of"),
            Pattern::Browse { mean_gap_secs } => self.browse(d, from, stop, mean_gap_secs),
            Pattern::Dual => {
                let seg = 1200 * SEC;
                let mut t = from;
                let mut browsing = true;
                while t < stop {
                    let until = (t + seg).min(stop);
                    if browsing {
                        self.browse(d, t, until, 90);
                    } else {
                        self.heartbeat(d, t, until, 30);
                    }
                    browsing = !browsing;
                    t += seg;
                }
            }
            Pattern::Stream => self.stream(d, from, stop),
            Pattern::Beacon { period_secs } => self.beacon(d, from, stop, period_secs),
            Pattern::Quiet => self.quiet(d, from, stop),
        }
    }

    fn browse(&mut self, d: usize, from: u64, to: u64, gap: u32) {
        let gap = u64::from(gap) * SEC;
        let mut t = from + self.rng.gen_range(0..gap);
        while t < to {
            let name = self.browse_name(d);
            let http = self.rng.gen_bool(0.2);
            self.fetch(d, t, name, http);
            if self.ntp.is_some() && t >= self.state[d].next_ntp {
                self.ntp_exchange(d, t + 500 * MS);
                self.state[d].next_ntp = t + 600 * SEC;
            }
            t += self.rng.gen_range(gap / 2..=gap * 3 / 2);
        }
    }

    fn heartbeat(&mut self, d: usize, from: u64, to: u64, period: u64) {
        let domain = self.vendor_domain(d);
        let mut t = from;
        let mut k = 0;
        while t < to {
            if k % 5 == 0 {
                self.dns_query(d, t, domain);
            }
            self.telemetry(d, t + 10 * MS, domain, 120);
            k += 1;
            t += period * SEC;
        }
    }

    /// Fixed phase relative to the capture start, so every window sees
    /// the same traffic.
    fn beacon(&mut self, d: usize, from: u64, to: u64, period: u32) {
        let period = u64::from(period) * SEC;
        let phase = self.rng.gen_range(3 * SEC..period - 3 * SEC);
        let k0 = (from.saturating_sub(self.t0 + phase)).div_ceil(period);
        let printer = self.sc.devices[d].persona == Persona::Printer;
        let mut t = self.t0 + phase + k0 * period;
        while t < to {
            let name = self.iot_name(d);
            self.dns_query(d, t, name);
            let vendor = self.vendor_domain(d);
            if printer {
                self.http_session(d, t + 10 * MS, vendor, "POST", "/checkin");
            } else {
                self.telemetry(d, t + 10 * MS, vendor, 480);
            }
            t += period;
        }
    }

    fn quiet(&mut self, d: usize, from: u64, to: u64) {
        let mut w = from;
        while w < to {
            let end = (w + 60 * SEC).min(to);
            if self.rng.gen_bool(0.1) {
                let t = self.rng.gen_range(w..end);
                let name = self.iot_name(d);
                self.dns_query(d, t, name);
                let vendor = self.vendor_domain(d);
                self.telemetry(d, t + 10 * MS, vendor, 40);
            }
            w = end;
        }
    }

    /// Cloud login and firmware check, then one long upload with 3-5 large
    /// segments in every minute window of the capture.
    fn stream(&mut self, d: usize, from: u64, to: u64) {
        let vendor = self.vendor_domain(d);
        self.dns_query(d, from, vendor);
        if traits(self.sc.devices[d].persona).suites.is_some() {
            self.https_session(d, from + 10 * MS, vendor);
        }
        if traits(self.sc.devices[d].persona).user_agent.is_some() {
            self.http_session(d, from + 500 * MS, vendor, "GET", "/fw/check");
        }
        let open = from + 2 * SEC;
        if open + SEC >= to {
            return;
        }
        let gw = self.gw();
        let sport = self.eph(d);
        let dport = catalog::STREAM_PORT;
        let dst = catalog::domain_ip(vendor).expect("catalog domain");
        let (mac, ip, gw_mac) = (self.mac(d), self.ip(d), self.mac(gw));
        let c: u32 = self.rng.gen();
        let s: u32 = self.rng.gen();
        self.emit(
            open,
            Some(d),
            mac,
            gw_mac,
            ip,
            dst,
            6,
            &wire::tcp_segment(sport, dport, c, 0, TCP_SYN, &[]),
        );
        self.emit(
            open + 20 * MS,
            None,
            gw_mac,
            mac,
            dst,
            ip,
            6,
            &wire::tcp_segment(dport, sport, s, c.wrapping_add(1), TCP_SYN | TCP_ACK, &[]),
        );
        self.emit(
            open + 40 * MS,
            Some(d),
            mac,
            gw_mac,
            ip,
            dst,
            6,
            &wire::tcp_segment(sport, dport, c.wrapping_add(1), s.wrapping_add(1), TCP_ACK, &[]),
        );
        self.note_flow(d, dst);
        let mut seq = c.wrapping_add(1);
        let mut next_dns = open + 300 * SEC;
        let body_start = open + SEC;
        let mut w = self.t0 + (body_start - self.t0) / (60 * SEC) * 60 * SEC;
        while w < to {
            let lo = w.max(body_start);
            let hi = (w + 60 * SEC).min(to);
            if lo < hi {
                let k = self.rng.gen_range(3..=5);
                let mut times: Vec<u64> = (0..k).map(|_| self.rng.gen_range(lo..hi)).collect();
                times.sort_unstable();
                for t in times {
                    let len = self.rng.gen_range(38_000..=42_000usize);
                    let payload = vec![0u8; len];
                    let seg = wire::tcp_segment(sport, dport, seq, s.wrapping_add(1), TCP_PSH | TCP_ACK, &payload);
                    self.emit(t, Some(d), mac, gw_mac, ip, dst, 6, &seg);
                    seq = seq.wrapping_add(len as u32);
                }
                if next_dns <= hi {
                    let name = self.iot_name(d);
                    let t = self.rng.gen_range(lo..hi);
                    self.dns_query(d, t, name);
                    next_dns += 300 * SEC;
                }
            }
            w += 60 * SEC;
        }
        self.emit(
            to,
            Some(d),
            mac,
            gw_mac,
            ip,
            dst,
            6,
            &wire::tcp_segment(sport, dport, seq, s.wrapping_add(1), TCP_FIN | TCP_ACK, &[]),
        );
        self.emit(
            to + 20 * MS,
            None,
            gw_mac,
            mac,
            dst,
            ip,
            6,
            &wire::tcp_segment(
                dport,
                sport,
                s.wrapping_add(1),
                seq.wrapping_add(1),
                TCP_FIN | TCP_ACK,
                &[],
            ),
        );
        self.emit(
            to + 40 * MS,
            Some(d),
            mac,
            gw_mac,
            ip,
            dst,
            6,
            &wire::tcp_segment(sport, dport, seq.wrapping_add(1), s.wrapping_add(2), TCP_ACK, &[]),
        );
    }

    fn finish(mut self, seed: u64) -> GeneratedCapture {
        self.frames.sort_by_key(|f| (f.ts, f.order));
        let sc = self.sc;
        let packets: Vec<PacketRecord> = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| PacketRecord {
                index: i as u64,
                ts: Timestamp::from_micros(f.ts),
                captured_len: f.data.len() as u32,
                original_len: f.original_len,
                data: f.data.clone(),
            })
            .collect();
        let header = CaptureHeader::ethernet(ByteOrder::LittleEndian, sc.snap_length);
        let pcap = write_capture(header, &packets);

        // activity per device
        let mut seen: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
        for f in &self.frames {
            if let Some(d) = f.origin {
                let e = seen.entry(d).or_insert((f.ts, f.ts));
                e.1 = f.ts;
            }
        }
        let key = |d: usize| format!("mac:{}", sc.devices[d].mac);

        let mut devices = Vec::new();
        let mut iot_labels = BTreeMap::new();
        for (&d, &(first, last)) in &seen {
            let spec = &sc.devices[d];
            let t = traits(spec.persona);
            let facts = &self.facts[d];
            let mut attributes = BTreeMap::new();
            attributes.insert("manufacturer".to_string(), spec.vendor.clone());
            // an IoT label needs evidence the classifiers can act on
            let iot_evident = !t.iot
                || facts.dns_queries >= MIN_IOT_QUERIES
                || (facts.user_agent && IOT_CLASSES.contains(&t.device_class));
            if iot_evident {
                attributes.insert("is_iot".to_string(), t.iot.to_string());
            }
            if let (true, Some(o)) = (spec.registered, &spec.owner) {
                attributes.insert("owner".to_string(), o.clone());
            }
            if facts.user_agent {
                attributes.extend(catalog::ua_attributes(spec.persona));
            }
            if facts.client_hello {
                if let Some(stack) = t.stack {
                    attributes.insert("stack".to_string(), stack.into());
                }
            }
            let blocks: Vec<_> = sc.blocks_of(&spec.id).collect();
            if let [(0, end, p)] = blocks.as_slice() {
                if *end == sc.duration_secs && sc.duration_secs >= 180 {
                    if let Some(mode) = p.behavior_label() {
                        attributes.insert("behavior_mode".to_string(), mode.into());
                    }
                }
            }
            if iot_evident && !spec.persona.is_infrastructure() {
                iot_labels.insert(key(d), t.iot);
            }
            devices.push(DeviceLabel {
                device_key: key(d),
                id: spec.id.clone(),
                mac: spec.mac,
                persona: spec.persona,
                owner: spec.owner.clone(),
                first_seen_micros: first,
                last_seen_micros: last,
                attributes,
            });
        }
        devices.sort_by(|a, b| a.device_key.cmp(&b.device_key));

        let epochs = self
            .epochs
            .iter()
            .map(|(ip, mac, ts)| EpochLabel {
                ip: *ip,
                device_key: format!("mac:{mac}"),
                start_micros: *ts,
            })
            .collect::<Vec<_>>();
        let mut epochs = epochs;
        epochs.sort_by_key(|e| (e.ip, e.start_micros));

        let violations = self.planted_violations(&seen);
        let occupancy = self.occupancy_labels();

        let mut l2: BTreeMap<(MacAddr, MacAddr), u64> = BTreeMap::new();
        for f in &self.frames {
            if f.dst_mac.is_multicast() {
                continue;
            }
            let k = if f.src_mac <= f.dst_mac {
                (f.src_mac, f.dst_mac)
            } else {
                (f.dst_mac, f.src_mac)
            };
            *l2.entry(k).or_default() += 1;
        }
        let adjacency = Adjacency {
            l2: l2
                .into_iter()
                .map(|((a, b), frames)| L2Adjacency { a, b, frames })
                .collect(),
            l3: core::mem::take(&mut self.l3)
                .into_iter()
                .map(|((src, dst), flows)| L3Adjacency { src, dst, flows })
                .collect(),
        };

        let sidecar = Sidecar {
            schema_version: super::scenario::SCHEMA_VERSION,
            scenario: sc.name.clone(),
            seed,
            packet_count: packets.len() as u64,
            devices,
            epochs,
            violations,
            iot_labels,
            occupancy,
            adjacency,
        };
        GeneratedCapture { pcap, packets, sidecar }
    }

    fn planted_violations(&self, seen: &BTreeMap<usize, (u64, u64)>) -> Vec<ViolationLabel> {
        let rules = rules_from_specs(&self.sc.policies).expect("validated policies");
        let mut out = Vec::new();
        for rule in &rules {
            for &d in seen.keys() {
                let spec = &self.sc.devices[d];
                let f = &self.facts[d];
                let hit = match &rule.kind {
                    PolicyKind::RequireRegistered => !spec.registered || !spec.authorized,
                    PolicyKind::RequireEncrypted { cleartext_ports } => {
                        f.http_ports.iter().any(|p| cleartext_ports.contains(p))
                    }
                    PolicyKind::ForbidDeviceClass { class } => {
                        f.user_agent && catalog::ua_attributes(spec.persona).get("device_type") == Some(class)
                    }
                    PolicyKind::ForbidDestGeo { countries } => f
                        .external
                        .iter()
                        .any(|ip| catalog::country_of(*ip).is_some_and(|c| countries.contains(c))),
                    PolicyKind::ForbidDomainSuffix { suffixes } => f.domains.iter().any(|name| {
                        suffixes
                            .iter()
                            .any(|s| domain_has_suffix(&normalize_domain(name), &normalize_domain(s)))
                    }),
                };
                if hit {
                    out.push(ViolationLabel {
                        rule_id: rule.rule_id.clone(),
                        device_key: format!("mac:{}", spec.mac),
                    });
                }
            }
        }
        out.sort();
        out
    }

    fn occupancy_labels(&self) -> Vec<OccupancyLabel> {
        let (Some(first), Some(last)) = (self.frames.first(), self.frames.last()) else {
            return Vec::new();
        };
        let w = u64::from(OCCUPANCY_WINDOW);
        let origin = first.ts / SEC / w * w;
        let n = (last.ts / SEC - origin) / w + 1;
        let mut active: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n as usize];
        for f in &self.frames {
            if let Some(d) = f.origin {
                active[((f.ts / SEC - origin) / w) as usize].insert(d);
            }
        }
        active
            .into_iter()
            .enumerate()
            .map(|(i, devs)| {
                let mut persons = BTreeSet::new();
                let mut unattributed = 0;
                for d in devs {
                    let spec = &self.sc.devices[d];
                    match (&spec.owner, spec.registered) {
                        (Some(o), true) => {
                            persons.insert(o.clone());
                        }
                        _ => unattributed += 1,
                    }
                }
                OccupancyLabel {
                    start: (origin + i as u64 * w) as u32,
                    end: (origin + (i as u64 + 1) * w) as u32,
                    persons: persons.into_iter().collect(),
                    unattributed,
                }
            })
            .collect()
    }
}
