use super::{Ipv4Datagram, Skip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransportKind {
    Tcp,
    Udp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;

    pub fn contains(&self, bit: u8) -> bool {
        self.0 & bit != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcpHeader {
    pub seq: u32,
    pub ack: u32,
    pub flags: TcpFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportSegment<'a> {
    pub src_port: u16,
    pub dst_port: u16,
    pub kind: TransportKind,
    /// Present iff `kind` is TCP.
    pub tcp: Option<TcpHeader>,
    pub payload: &'a [u8],
}

pub fn decode_transport<'a>(d: &Ipv4Datagram<'a>) -> Result<TransportSegment<'a>, Skip> {
    let p = d.payload;
    match d.protocol {
        6 => {
            if p.len() < 20 {
                return Err(Skip::TooShort);
            }
            let offset = ((p[12] >> 4) as usize) * 4;
            if offset < 20 || offset > p.len() {
                return Err(Skip::BadHeaderLength);
            }
            Ok(TransportSegment {
                src_port: u16::from_be_bytes([p[0], p[1]]),
                dst_port: u16::from_be_bytes([p[2], p[3]]),
                kind: TransportKind::Tcp,
                tcp: Some(TcpHeader {
                    seq: u32::from_be_bytes([p[4], p[5], p[6], p[7]]),
                    ack: u32::from_be_bytes([p[8], p[9], p[10], p[11]]),
                    flags: TcpFlags(p[13]),
                }),
                payload: &p[offset..],
            })
        }
        17 => {
            if p.len() < 8 {
                return Err(Skip::TooShort);
            }
            let udp_len = u16::from_be_bytes([p[4], p[5]]) as usize;
            if udp_len < 8 {
                return Err(Skip::BadHeaderLength);
            }
            Ok(TransportSegment {
                src_port: u16::from_be_bytes([p[0], p[1]]),
                dst_port: u16::from_be_bytes([p[2], p[3]]),
                kind: TransportKind::Udp,
                tcp: None,
                payload: &p[8..udp_len.min(p.len())],
            })
        }
        other => Err(Skip::UnsupportedProtocol(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::net::Ipv4Addr;

    fn datagram(protocol: u8, payload: &[u8]) -> Ipv4Datagram<'_> {
        Ipv4Datagram {
            src_ip: Ipv4Addr::new(10, 0, 0, 2),
            dst_ip: Ipv4Addr::new(10, 0, 0, 1),
            protocol,
            header_len: 20,
            total_len: 20 + payload.len(),
            payload,
            truncated: false,
        }
    }

    #[test]
    fn udp_ports_and_payload() {
        let bytes = [0x13, 0x88, 0, 53, 0, 10, 0, 0, 0xde, 0xad];
        let s = decode_transport(&datagram(17, &bytes)).unwrap();
        assert_eq!((s.kind, s.src_port, s.dst_port), (TransportKind::Udp, 5000, 53));
        assert_eq!(s.payload, &[0xde, 0xad]);
        assert!(s.tcp.is_none());
    }

    #[test]
    fn tcp_data_offset_eight_starts_payload_at_32() {
        let mut bytes: Vec<u8> = alloc::vec![0; 32];
        bytes[2] = 0x01;
        bytes[3] = 0xbb;
        bytes[12] = 8 << 4;
        bytes[13] = TcpFlags::SYN | TcpFlags::ACK;
        bytes.push(0x16);
        let s = decode_transport(&datagram(6, &bytes)).unwrap();
        assert_eq!(s.dst_port, 443);
        assert_eq!(s.payload, &[0x16]);
        let tcp = s.tcp.unwrap();
        assert!(tcp.flags.contains(TcpFlags::SYN));
        assert!(!tcp.flags.contains(TcpFlags::FIN));
    }

    #[test]
    fn icmp_is_skipped() {
        assert_eq!(
            decode_transport(&datagram(1, &[8, 0, 0, 0])),
            Err(Skip::UnsupportedProtocol(1))
        );
    }
}
