//! Byte-level encoders for the frames and application messages the
//! generator emits. Written independently of the decoders so the two can
//! check each other.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use crate::decoders::DhcpMessageType;
use crate::MacAddr;

pub fn ethernet_frame(src: MacAddr, dst: MacAddr, ethertype: u16, body: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + body.len());
    f.extend_from_slice(&dst.0);
    f.extend_from_slice(&src.0);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(body);
    f
}

fn checksum(bytes: &[u8]) -> u16 {
    let mut sum = 0u32;
    for pair in bytes.chunks(2) {
        let word = if pair.len() == 2 {
            u16::from_be_bytes([pair[0], pair[1]])
        } else {
            u16::from_be_bytes([pair[0], 0])
        };
        sum += word as u32;
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

pub fn ipv4_packet(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, ident: u16, body: &[u8]) -> Vec<u8> {
    let total = 20 + body.len();
    let mut ip = Vec::with_capacity(total);
    ip.push(0x45);
    ip.push(0);
    ip.extend_from_slice(&(total as u16).to_be_bytes());
    ip.extend_from_slice(&ident.to_be_bytes());
    ip.extend_from_slice(&[0x40, 0x00, 64, protocol, 0, 0]);
    ip.extend_from_slice(&src.octets());
    ip.extend_from_slice(&dst.octets());
    let sum = checksum(&ip);
    ip[10..12].copy_from_slice(&sum.to_be_bytes());
    ip.extend_from_slice(body);
    ip
}

pub fn udp_datagram(sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let mut u = Vec::with_capacity(8 + payload.len());
    u.extend_from_slice(&sport.to_be_bytes());
    u.extend_from_slice(&dport.to_be_bytes());
    u.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    u.extend_from_slice(&[0, 0]);
    u.extend_from_slice(payload);
    u
}

pub fn tcp_segment(sport: u16, dport: u16, seq: u32, ack: u32, flags: u8, payload: &[u8]) -> Vec<u8> {
    let mut t = Vec::with_capacity(20 + payload.len());
    t.extend_from_slice(&sport.to_be_bytes());
    t.extend_from_slice(&dport.to_be_bytes());
    t.extend_from_slice(&seq.to_be_bytes());
    t.extend_from_slice(&ack.to_be_bytes());
    t.push(5 << 4);
    t.push(flags);
    t.extend_from_slice(&64240u16.to_be_bytes());
    t.extend_from_slice(&[0, 0, 0, 0]);
    t.extend_from_slice(payload);
    t
}

/// Input for [`encode_dns`].
#[derive(Debug, Clone)]
pub struct DnsMessageSpec {
    pub id: u16,
    pub is_response: bool,
    pub query_name: String,
    pub qtype: u16,
    pub answers: Vec<(String, Ipv4Addr)>,
    /// Use RFC 1035 suffix compression for repeated names.
    pub compress: bool,
}

fn put_name(out: &mut Vec<u8>, name: &str, seen: &mut BTreeMap<String, usize>, compress: bool) {
    let lower = name.trim_end_matches('.').to_ascii_lowercase();
    let labels: Vec<&str> = lower.split('.').filter(|l| !l.is_empty()).collect();
    for i in 0..labels.len() {
        let suffix = labels[i..].join(".");
        if compress {
            if let Some(&off) = seen.get(&suffix) {
                out.extend_from_slice(&(0xc000u16 | off as u16).to_be_bytes());
                return;
            }
            if out.len() < 0x3fff {
                seen.insert(suffix, out.len());
            }
        }
        out.push(labels[i].len() as u8);
        out.extend_from_slice(labels[i].as_bytes());
    }
    out.push(0);
}

pub fn encode_dns(spec: &DnsMessageSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    let mut seen = BTreeMap::new();
    out.extend_from_slice(&spec.id.to_be_bytes());
    let flags: u16 = if spec.is_response { 0x8180 } else { 0x0100 };
    out.extend_from_slice(&flags.to_be_bytes());
    let ancount = if spec.is_response { spec.answers.len() } else { 0 };
    for count in [1u16, ancount as u16, 0, 0] {
        out.extend_from_slice(&count.to_be_bytes());
    }
    put_name(&mut out, &spec.query_name, &mut seen, spec.compress);
    out.extend_from_slice(&spec.qtype.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    if spec.is_response {
        for (name, ip) in &spec.answers {
            put_name(&mut out, name, &mut seen, spec.compress);
            out.extend_from_slice(&1u16.to_be_bytes());
            out.extend_from_slice(&1u16.to_be_bytes());
            out.extend_from_slice(&300u32.to_be_bytes());
            out.extend_from_slice(&4u16.to_be_bytes());
            out.extend_from_slice(&ip.octets());
        }
    }
    out
}

/// Input for [`encode_dhcp`].
#[derive(Debug, Clone)]
pub struct DhcpMessageSpec {
    pub msg_type: DhcpMessageType,
    pub xid: u32,
    pub client_mac: MacAddr,
    pub yiaddr: Ipv4Addr,
    pub hostname: Option<String>,
    pub vendor_class: Option<String>,
    pub param_req_list: Option<Vec<u8>>,
}

pub fn encode_dhcp(spec: &DhcpMessageSpec) -> Vec<u8> {
    let mut out = alloc::vec![0u8; 240];
    out[0] = if spec.msg_type.is_server_message() { 2 } else { 1 };
    out[1] = 1;
    out[2] = 6;
    out[4..8].copy_from_slice(&spec.xid.to_be_bytes());
    out[16..20].copy_from_slice(&spec.yiaddr.octets());
    out[28..34].copy_from_slice(&spec.client_mac.0);
    out[236..240].copy_from_slice(&[0x63, 0x82, 0x53, 0x63]);
    out.extend_from_slice(&[53, 1, spec.msg_type.code()]);
    let mut opt = |code: u8, value: &[u8]| {
        out.push(code);
        out.push(value.len() as u8);
        out.extend_from_slice(value);
    };
    if let Some(h) = &spec.hostname {
        opt(12, h.as_bytes());
    }
    if let Some(v) = &spec.vendor_class {
        opt(60, v.as_bytes());
    }
    if let Some(p) = &spec.param_req_list {
        opt(55, p);
    }
    out.push(255);
    // pad to the BOOTP minimum
    while out.len() < 300 {
        out.push(0);
    }
    out
}

pub fn encode_http_request(method: &str, uri: &str, host: &str, user_agent: Option<&str>) -> Vec<u8> {
    let mut s = String::new();
    s.push_str(method);
    s.push(' ');
    s.push_str(uri);
    s.push_str(" HTTP/1.1\r\nHost: ");
    s.push_str(host);
    s.push_str("\r\n");
    if let Some(ua) = user_agent {
        s.push_str("User-Agent: ");
        s.push_str(ua);
        s.push_str("\r\n");
    }
    s.push_str("Accept: */*\r\nConnection: keep-alive\r\n\r\n");
    s.into_bytes()
}

fn handshake_record(messages: &[(u8, Vec<u8>)]) -> Vec<u8> {
    let mut hs = Vec::new();
    for (t, body) in messages {
        hs.push(*t);
        hs.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
        hs.extend_from_slice(body);
    }
    let mut rec = Vec::with_capacity(5 + hs.len());
    rec.extend_from_slice(&[22, 3, 1]);
    rec.extend_from_slice(&(hs.len() as u16).to_be_bytes());
    rec.extend_from_slice(&hs);
    rec
}

pub fn encode_client_hello(suites: &[u16], sni: Option<&str>) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&[3, 3]);
    body.extend((0u8..32).map(|i| i.wrapping_mul(7)));
    body.push(0);
    body.extend_from_slice(&((suites.len() * 2) as u16).to_be_bytes());
    for s in suites {
        body.extend_from_slice(&s.to_be_bytes());
    }
    body.extend_from_slice(&[1, 0]);

    let mut ext = Vec::new();
    if let Some(name) = sni {
        let n = name.as_bytes();
        ext.extend_from_slice(&0u16.to_be_bytes());
        ext.extend_from_slice(&((n.len() + 5) as u16).to_be_bytes());
        ext.extend_from_slice(&((n.len() + 3) as u16).to_be_bytes());
        ext.push(0);
        ext.extend_from_slice(&(n.len() as u16).to_be_bytes());
        ext.extend_from_slice(n);
    }
    // supported_groups: x25519, secp256r1
    ext.extend_from_slice(&[0x00, 0x0a, 0x00, 0x06, 0x00, 0x04, 0x00, 0x1d, 0x00, 0x17]);
    body.extend_from_slice(&(ext.len() as u16).to_be_bytes());
    body.extend_from_slice(&ext);
    handshake_record(&[(1, body)])
}

fn der(tag: u8, value: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(value.len() + 5);
    out.push(tag);
    let len = value.len();
    if len < 0x80 {
        out.push(len as u8);
    } else if len <= 0xff {
        out.extend_from_slice(&[0x81, len as u8]);
    } else if len <= 0xffff {
        out.push(0x82);
        out.extend_from_slice(&(len as u16).to_be_bytes());
    } else {
        out.push(0x83);
        out.extend_from_slice(&(len as u32).to_be_bytes()[1..]);
    }
    out.extend_from_slice(value);
    out
}

fn der_name(org: &str, cn: &str) -> Vec<u8> {
    let attr = |oid: &[u8], v: &str| der(0x31, &der(0x30, &[der(0x06, oid), der(0x0c, v.as_bytes())].concat()));
    der(
        0x30,
        &[
            attr(&[0x55, 0x04, 0x06], "US"),
            attr(&[0x55, 0x04, 0x0a], org),
            attr(&[0x55, 0x04, 0x03], cn),
        ]
        .concat(),
    )
}

/// A structurally valid (unsigned) X.509 certificate.
pub fn encode_der_certificate(issuer_cn: &str, subject_cn: &str) -> Vec<u8> {
    let sha256_rsa = der(
        0x30,
        &[
            der(0x06, &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x0b]),
            der(0x05, &[]),
        ]
        .concat(),
    );
    let validity = der(
        0x30,
        &[der(0x17, b"240101000000Z"), der(0x17, b"340101000000Z")].concat(),
    );
    let rsa = der(
        0x30,
        &[
            der(0x06, &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x01]),
            der(0x05, &[]),
        ]
        .concat(),
    );
    let spki = der(0x30, &[rsa, der(0x03, &[0, 0x30, 0x03, 0x02, 0x01, 0x03])].concat());
    let tbs = der(
        0x30,
        &[
            der(0xa0, &der(0x02, &[2])),
            der(0x02, &[0x01, 0x23, 0x45]),
            sha256_rsa.clone(),
            der_name("Issuer Org", issuer_cn),
            validity,
            der_name("Subject Org", subject_cn),
            spki,
        ]
        .concat(),
    );
    der(
        0x30,
        &[tbs, sha256_rsa, der(0x03, &[0, 0xde, 0xad, 0xbe, 0xef])].concat(),
    )
}

/// Handshake record carrying a Certificate message, optionally preceded by
/// a minimal ServerHello in the same record.
pub fn encode_certificate_message(cert_der: &[u8], with_server_hello: bool) -> Vec<u8> {
    let mut msgs = Vec::new();
    if with_server_hello {
        let mut sh = Vec::new();
        sh.extend_from_slice(&[3, 3]);
        sh.extend_from_slice(&[0x5a; 32]);
        sh.push(0);
        sh.extend_from_slice(&0x1301u16.to_be_bytes());
        sh.push(0);
        msgs.push((2u8, sh));
    }
    let mut cert = Vec::new();
    cert.extend_from_slice(&((cert_der.len() + 3) as u32).to_be_bytes()[1..]);
    cert.extend_from_slice(&(cert_der.len() as u32).to_be_bytes()[1..]);
    cert.extend_from_slice(cert_der);
    msgs.push((11, cert));
    handshake_record(&msgs)
}

/// TLS application-data record of `len` opaque bytes.
pub fn encode_app_data(len: usize) -> Vec<u8> {
    let mut rec = Vec::with_capacity(5 + len);
    rec.extend_from_slice(&[23, 3, 3]);
    rec.extend_from_slice(&(len as u16).to_be_bytes());
    rec.extend(core::iter::repeat(0xa5).take(len));
    rec
}
