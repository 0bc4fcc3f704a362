use super::Skip;
use crate::ingest::PacketRecord;
use crate::{MacAddr, Timestamp};

pub const ETHERTYPE_IPV4: u16 = 0x0800;

/// Ethernet II frame borrowed from a packet record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EthernetFrame<'a> {
    pub dst_mac: MacAddr,
    pub src_mac: MacAddr,
    pub ethertype: u16,
    pub payload: &'a [u8],
    pub ts: Timestamp,
}

/// Parses any Ethernet II frame regardless of ethertype.
pub fn parse_ethernet(p: &PacketRecord) -> Result<EthernetFrame<'_>, Skip> {
    let d = &p.data;
    if d.len() < 14 {
        return Err(Skip::TooShort);
    }
    Ok(EthernetFrame {
        dst_mac: MacAddr::from_slice(&d[0..6]).ok_or(Skip::TooShort)?,
        src_mac: MacAddr::from_slice(&d[6..12]).ok_or(Skip::TooShort)?,
        ethertype: u16::from_be_bytes([d[12], d[13]]),
        payload: &d[14..],
        ts: p.ts,
    })
}

/// Parses a frame and keeps it only when it carries IPv4.
pub fn decode_ethernet(p: &PacketRecord) -> Result<EthernetFrame<'_>, Skip> {
    let f = parse_ethernet(p)?;
    if f.ethertype != ETHERTYPE_IPV4 {
        return Err(Skip::UnsupportedEthertype(f.ethertype));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn minimal_frame_has_empty_payload() {
        let mut data = vec![0xff; 6];
        data.extend_from_slice(&[0x02, 0, 0, 0, 0, 1]);
        data.extend_from_slice(&[0x08, 0x00]);
        let p = PacketRecord::new(0, Timestamp::from_secs(1), data);
        let f = decode_ethernet(&p).unwrap();
        assert!(f.payload.is_empty());
        assert_eq!(f.src_mac, MacAddr::new(0x02, 0, 0, 0, 0, 1));
        assert_eq!(f.dst_mac, MacAddr::BROADCAST);
    }

    #[test]
    fn thirteen_bytes_is_too_short() {
        let p = PacketRecord::new(0, Timestamp::from_secs(1), vec![0; 13]);
        assert_eq!(decode_ethernet(&p), Err(Skip::TooShort));
    }

    #[test]
    fn non_ipv4_is_skipped() {
        let mut data = vec![0; 12];
        data.extend_from_slice(&[0x86, 0xdd]);
        let p = PacketRecord::new(0, Timestamp::from_secs(1), data);
        assert_eq!(decode_ethernet(&p), Err(Skip::UnsupportedEthertype(0x86dd)));
        assert!(parse_ethernet(&p).is_ok());
    }
}
