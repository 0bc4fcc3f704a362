//! Header decoders, flow assembly and application protocol event extraction.
//!
//! Application dispatch is port based: UDP 53 → DNS, UDP 67/68 → DHCP,
//! TCP to 80/8080 → HTTP request heads, TCP 443 (either side) → TLS
//! handshakes. TCP payloads are parsed per segment, in order per flow
//! direction; there is no stream reassembly.

mod dhcp;
mod dns;
mod ethernet;
mod flow;
mod http;
mod ipv4;
mod tls;
mod transport;
mod x509;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

pub use dhcp::decode_dhcp;
pub use dns::{decode_dns, read_name};
pub use ethernet::{decode_ethernet, parse_ethernet, EthernetFrame, ETHERTYPE_IPV4};
pub use flow::{
    assemble_flows, Direction, Endpoint, FlowKey, FlowRecord, FlowTable, SegmentOrder, DEFAULT_FLOW_TIMEOUT_SECS,
};
pub use http::{decode_http, HTTP_HEAD_LIMIT};
pub use ipv4::{decode_ipv4, Ipv4Datagram};
pub use tls::{cipher_fingerprint, decode_tls};
pub use transport::{decode_transport, TcpFlags, TcpHeader, TransportKind, TransportSegment};
pub use x509::certificate_common_names;

use crate::ingest::PacketRecord;
use crate::{MacAddr, Timestamp};

/// Why a packet or payload produced no decoded output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Skip {
    TooShort,
    UnsupportedEthertype(u16),
    NotIpv4,
    BadHeaderLength,
    Fragmented,
    UnsupportedProtocol(u8),
    Malformed,
    Truncated,
    NoCookie,
    UnsupportedMessage,
    NotRequest,
    NotHandshake,
    NoHandshakeOfInterest,
    Reordered,
}

impl core::fmt::Display for Skip {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Skip::UnsupportedEthertype(t) => write!(f, "unsupported_ethertype_{t:#06x}"),
            Skip::UnsupportedProtocol(p) => write!(f, "unsupported_protocol_{p}"),
            other => {
                let s = match other {
                    Skip::TooShort => "too_short",
                    Skip::NotIpv4 => "not_ipv4",
                    Skip::BadHeaderLength => "bad_header_length",
                    Skip::Fragmented => "fragmented",
                    Skip::Malformed => "malformed",
                    Skip::Truncated => "truncated",
                    Skip::NoCookie => "no_cookie",
                    Skip::UnsupportedMessage => "unsupported_message",
                    Skip::NotRequest => "not_request",
                    Skip::NotHandshake => "not_handshake",
                    Skip::NoHandshakeOfInterest => "no_handshake_of_interest",
                    Skip::Reordered => "reordered",
                    _ => unreachable!(),
                };
                f.write_str(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AppProtocol {
    Dns,
    Dhcp,
    Http,
    Tls,
}

impl AppProtocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            AppProtocol::Dns => "dns",
            AppProtocol::Dhcp => "dhcp",
            AppProtocol::Http => "http",
            AppProtocol::Tls => "tls",
        }
    }
}

/// Addressing shared by every protocol event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventMeta {
    pub ts: Timestamp,
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsEvent {
    pub meta: EventMeta,
    pub query_name: String,
    pub qtype: u16,
    pub answers: Vec<(String, Ipv4Addr)>,
    pub is_response: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DhcpMessageType {
    Discover,
    Offer,
    Request,
    Ack,
    Release,
}

impl DhcpMessageType {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Discover),
            2 => Some(Self::Offer),
            3 => Some(Self::Request),
            5 => Some(Self::Ack),
            7 => Some(Self::Release),
            _ => None,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Self::Discover => 1,
            Self::Offer => 2,
            Self::Request => 3,
            Self::Ack => 5,
            Self::Release => 7,
        }
    }

    /// Sent by the server rather than the client.
    pub fn is_server_message(&self) -> bool {
        matches!(self, Self::Offer | Self::Ack)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhcpEvent {
    pub meta: EventMeta,
    pub msg_type: DhcpMessageType,
    pub client_mac: MacAddr,
    pub assigned_ip: Option<Ipv4Addr>,
    pub hostname: Option<String>,
    pub vendor_class: Option<String>,
    pub param_req_list: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpEvent {
    pub meta: EventMeta,
    pub method: String,
    pub uri: String,
    pub host: Option<String>,
    pub user_agent: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlsStage {
    ClientHello,
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsEvent {
    pub meta: EventMeta,
    pub stage: TlsStage,
    pub sni: Option<String>,
    pub cipher_suites: Option<Vec<u16>>,
    pub issuer_cn: Option<String>,
    pub subject_cn: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolEvent {
    Dns(DnsEvent),
    Dhcp(DhcpEvent),
    Http(HttpEvent),
    Tls(TlsEvent),
}

impl ProtocolEvent {
    pub fn meta(&self) -> &EventMeta {
        match self {
            ProtocolEvent::Dns(e) => &e.meta,
            ProtocolEvent::Dhcp(e) => &e.meta,
            ProtocolEvent::Http(e) => &e.meta,
            ProtocolEvent::Tls(e) => &e.meta,
        }
    }

    pub fn protocol(&self) -> AppProtocol {
        match self {
            ProtocolEvent::Dns(_) => AppProtocol::Dns,
            ProtocolEvent::Dhcp(_) => AppProtocol::Dhcp,
            ProtocolEvent::Http(_) => AppProtocol::Http,
            ProtocolEvent::Tls(_) => AppProtocol::Tls,
        }
    }
}

/// Per-frame summary used by identity binding, topology and activity
/// tracking. Present for every frame that parsed as Ethernet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketObservation {
    pub ts: Timestamp,
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub ethertype: u16,
    pub frame_len: u32,
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    /// IPv4 total length, 0 for non-IPv4 frames.
    pub ip_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub flow_timeout_secs: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            flow_timeout_secs: DEFAULT_FLOW_TIMEOUT_SECS,
        }
    }
}

/// Counters proving every packet was accounted for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub packets_in: u64,
    /// Packets that never reached a transport segment, by reason.
    pub packet_skips: BTreeMap<Skip, u64>,
    /// Packets that contributed to a flow.
    pub segments: u64,
    pub truncated_datagrams: u64,
    pub events: BTreeMap<AppProtocol, u64>,
    pub app_skips: BTreeMap<(AppProtocol, Skip), u64>,
}

impl DecodeStats {
    pub fn skipped_packets(&self) -> u64 {
        self.packet_skips.values().sum()
    }

    /// `packets_in == segments + skipped`.
    pub fn is_balanced(&self) -> bool {
        self.packets_in == self.segments + self.skipped_packets()
    }

    pub fn malformed(&self) -> u64 {
        self.packet_skips.get(&Skip::Malformed).copied().unwrap_or(0)
            + self
                .app_skips
                .iter()
                .filter(|((_, s), _)| *s == Skip::Malformed)
                .map(|(_, n)| n)
                .sum::<u64>()
    }
}

/// What one packet produced.
#[derive(Debug, Default)]
pub struct DecodedPacket {
    pub observation: Option<PacketObservation>,
    pub event: Option<ProtocolEvent>,
    /// Flows that expired while processing this packet.
    pub expired_flows: Vec<FlowRecord>,
}

/// Stateful decoder for one capture.
#[derive(Debug)]
pub struct PacketDecoder {
    flows: FlowTable,
    stats: DecodeStats,
}

impl PacketDecoder {
    pub fn new(config: DecoderConfig) -> Self {
        PacketDecoder {
            flows: FlowTable::new(config.flow_timeout_secs),
            stats: DecodeStats::default(),
        }
    }

    pub fn stats(&self) -> &DecodeStats {
        &self.stats
    }

    pub fn decode(&mut self, packet: &PacketRecord) -> DecodedPacket {
        let mut out = DecodedPacket::default();
        self.stats.packets_in += 1;
        let frame = match parse_ethernet(packet) {
            Ok(f) => f,
            Err(s) => {
                self.skip_packet(s);
                return out;
            }
        };
        let mut obs = PacketObservation {
            ts: packet.ts,
            src_mac: frame.src_mac,
            dst_mac: frame.dst_mac,
            ethertype: frame.ethertype,
            frame_len: packet.original_len,
            src_ip: None,
            dst_ip: None,
            ip_len: 0,
        };
        if frame.ethertype != ETHERTYPE_IPV4 {
            out.observation = Some(obs);
            self.skip_packet(Skip::UnsupportedEthertype(frame.ethertype));
            return out;
        }
        let datagram = match decode_ipv4(&frame) {
            Ok(d) => d,
            Err(s) => {
                out.observation = Some(obs);
                self.skip_packet(s);
                return out;
            }
        };
        obs.src_ip = Some(datagram.src_ip);
        obs.dst_ip = Some(datagram.dst_ip);
        obs.ip_len = datagram.total_len as u32;
        out.observation = Some(obs);
        if datagram.truncated {
            self.stats.truncated_datagrams += 1;
        }
        let segment = match decode_transport(&datagram) {
            Ok(s) => s,
            Err(s) => {
                self.skip_packet(s);
                return out;
            }
        };
        self.stats.segments += 1;

        let src = Endpoint::new(datagram.src_ip, segment.src_port);
        let dst = Endpoint::new(datagram.dst_ip, segment.dst_port);
        let order = self.flows.observe(
            packet.ts,
            src,
            dst,
            &segment,
            datagram.total_len as u64,
            &mut out.expired_flows,
        );
        if segment.payload.is_empty() {
            return out;
        }
        let meta = EventMeta {
            ts: packet.ts,
            src_mac: frame.src_mac,
            dst_mac: frame.dst_mac,
            src_ip: datagram.src_ip,
            dst_ip: datagram.dst_ip,
            src_port: segment.src_port,
            dst_port: segment.dst_port,
        };
        let Some(proto) = dispatch(&segment) else {
            return out;
        };
        let result = if order == SegmentOrder::Reordered {
            Err(Skip::Reordered)
        } else {
            match proto {
                AppProtocol::Dns => decode_dns(meta, segment.payload).map(ProtocolEvent::Dns),
                AppProtocol::Dhcp => decode_dhcp(meta, segment.payload).map(ProtocolEvent::Dhcp),
                AppProtocol::Http => decode_http(meta, segment.payload).map(ProtocolEvent::Http),
                AppProtocol::Tls => decode_tls(meta, segment.payload).map(ProtocolEvent::Tls),
            }
        };
        match result {
            Ok(ev) => {
                *self.stats.events.entry(proto).or_default() += 1;
                out.event = Some(ev);
            }
            Err(s) => *self.stats.app_skips.entry((proto, s)).or_default() += 1,
        }
        out
    }

    /// Flushes all open flows at end of stream.
    pub fn finish(&mut self) -> Vec<FlowRecord> {
        self.flows.drain_all()
    }

    fn skip_packet(&mut self, s: Skip) {
        *self.stats.packet_skips.entry(s).or_default() += 1;
    }
}

fn dispatch(seg: &TransportSegment<'_>) -> Option<AppProtocol> {
    let either = |p: u16| seg.src_port == p || seg.dst_port == p;
    match seg.kind {
        TransportKind::Udp if either(53) => Some(AppProtocol::Dns),
        TransportKind::Udp if either(67) || either(68) => Some(AppProtocol::Dhcp),
        TransportKind::Tcp if seg.dst_port == 80 || seg.dst_port == 8080 => Some(AppProtocol::Http),
        TransportKind::Tcp if either(443) => Some(AppProtocol::Tls),
        _ => None,
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn pkt(index: u64, data: Vec<u8>) -> PacketRecord {
        PacketRecord::new(index, Timestamp::from_secs(100 + index as u32), data)
    }

    #[test]
    fn every_packet_is_accounted_for() {
        let a = MacAddr::new(0, 0x1b, 0, 0, 0, 1);
        let b = MacAddr::new(0, 0x1b, 0, 0, 0, 2);
        let ip_a = Ipv4Addr::new(10, 0, 0, 2);
        let ip_b = Ipv4Addr::new(10, 0, 0, 1);
        let frames = [
            ethernet(a, b, 0x0800, &ipv4_udp(ip_a, ip_b, 5000, 9999, b"x")),
            ethernet(a, b, 0x0806, &[0; 28]),
            ethernet(a, b, 0x0800, &ipv4(ip_a, ip_b, 1, &[8, 0, 0, 0])),
            alloc::vec![0u8; 13],
            ethernet(a, b, 0x0800, &ipv4_udp(ip_a, ip_b, 5000, 53, &[0; 4])),
        ];
        let mut dec = PacketDecoder::new(DecoderConfig::default());
        for (i, f) in frames.iter().enumerate() {
            dec.decode(&pkt(i as u64, f.clone()));
        }
        let flows = dec.finish();
        let stats = dec.stats();
        assert!(stats.is_balanced());
        assert_eq!(stats.packets_in, 5);
        assert_eq!(stats.segments, 2);
        assert_eq!(stats.packet_skips[&Skip::TooShort], 1);
        assert_eq!(stats.packet_skips[&Skip::UnsupportedEthertype(0x0806)], 1);
        assert_eq!(stats.packet_skips[&Skip::UnsupportedProtocol(1)], 1);
        assert_eq!(stats.app_skips[&(AppProtocol::Dns, Skip::Malformed)], 1);
        assert_eq!(flows.len(), 2);
    }

    #[test]
    fn skip_reasons_render() {
        use alloc::string::ToString;
        assert_eq!(
            Skip::UnsupportedEthertype(0x86dd).to_string(),
            "unsupported_ethertype_0x86dd"
        );
        assert_eq!(Skip::Reordered.to_string(), "reordered");
    }
}
