use core::net::Ipv4Addr;

use super::{EthernetFrame, Skip};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv4Datagram<'a> {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub protocol: u8,
    pub header_len: usize,
    pub total_len: usize,
    /// Bytes after the header, clipped to `total_len` (drops Ethernet padding).
    pub payload: &'a [u8],
    /// The capture holds fewer bytes than `total_len` claims.
    pub truncated: bool,
}

pub fn decode_ipv4<'a>(f: &EthernetFrame<'a>) -> Result<Ipv4Datagram<'a>, Skip> {
    let d = f.payload;
    if d.is_empty() {
        return Err(Skip::TooShort);
    }
    if d[0] >> 4 != 4 {
        return Err(Skip::NotIpv4);
    }
    let header_len = ((d[0] & 0x0f) as usize) * 4;
    if header_len < 20 || d.len() < header_len {
        return Err(Skip::BadHeaderLength);
    }
    let total_len = u16::from_be_bytes([d[2], d[3]]) as usize;
    if total_len < header_len {
        return Err(Skip::BadHeaderLength);
    }
    let flags_frag = u16::from_be_bytes([d[6], d[7]]);
    let more_fragments = flags_frag & 0x2000 != 0;
    if more_fragments || flags_frag & 0x1fff != 0 {
        return Err(Skip::Fragmented);
    }
    let end = total_len.min(d.len());
    Ok(Ipv4Datagram {
        src_ip: Ipv4Addr::new(d[12], d[13], d[14], d[15]),
        dst_ip: Ipv4Addr::new(d[16], d[17], d[18], d[19]),
        protocol: d[9],
        header_len,
        total_len,
        payload: &d[header_len..end],
        truncated: d.len() < total_len,
    })
}
