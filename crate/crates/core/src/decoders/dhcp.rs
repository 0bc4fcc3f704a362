use alloc::string::String;
use core::net::Ipv4Addr;

use super::{DhcpEvent, DhcpMessageType, EventMeta, Skip};
use crate::MacAddr;

pub(crate) const MAGIC_COOKIE: [u8; 4] = [0x63, 0x82, 0x53, 0x63];
const FIXED_LEN: usize = 240;

pub fn decode_dhcp(meta: EventMeta, payload: &[u8]) -> Result<DhcpEvent, Skip> {
    if payload.len() < FIXED_LEN {
        return Err(Skip::Malformed);
    }
    if payload[236..240] != MAGIC_COOKIE {
        return Err(Skip::NoCookie);
    }
    let yiaddr = Ipv4Addr::new(payload[16], payload[17], payload[18], payload[19]);
    let client_mac = MacAddr::from_slice(&payload[28..34]).ok_or(Skip::Malformed)?;

    let mut msg_code = None;
    let mut hostname = None;
    let mut vendor_class = None;
    let mut param_req_list = None;
    let mut pos = FIXED_LEN;
    while pos < payload.len() {
        let code = payload[pos];
        match code {
            0 => {
                pos += 1;
                continue;
            }
            255 => break,
            _ => {}
        }
        let len = *payload.get(pos + 1).ok_or(Skip::Malformed)? as usize;
        let value = payload.get(pos + 2..pos + 2 + len).ok_or(Skip::Malformed)?;
        match code {
            53 if len == 1 => msg_code = Some(value[0]),
            53 => return Err(Skip::Malformed),
            12 => hostname = Some(text(value)),
            60 => vendor_class = Some(text(value)),
            55 => param_req_list = Some(value.to_vec()),
            _ => {}
        }
        pos += 2 + len;
    }

    let msg_type = match msg_code {
        None => return Err(Skip::Malformed),
        Some(c) => DhcpMessageType::from_code(c).ok_or(Skip::UnsupportedMessage)?,
    };
    let assigned_ip = (!yiaddr.is_unspecified()).then_some(yiaddr);
    if msg_type == DhcpMessageType::Ack && assigned_ip.is_none() {
        // ACK to DHCPINFORM carries no lease
        return Err(Skip::UnsupportedMessage);
    }
    Ok(DhcpEvent {
        meta,
        msg_type,
        client_mac,
        assigned_ip,
        hostname,
        vendor_class,
        param_req_list,
    })
}

fn text(bytes: &[u8]) -> String {
    let trimmed = match bytes.iter().rposition(|b| *b != 0) {
        Some(i) => &bytes[..=i],
        None => &[],
    };
    String::from_utf8_lossy(trimmed).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trafficgen::wire::{encode_dhcp, DhcpMessageSpec};
    use crate::Timestamp;
    use alloc::string::ToString;
    use alloc::vec;

    fn meta() -> EventMeta {
        EventMeta {
            ts: Timestamp::from_secs(1),
            src_mac: MacAddr::ZERO,
            dst_mac: MacAddr::BROADCAST,
            src_ip: Ipv4Addr::UNSPECIFIED,
            dst_ip: Ipv4Addr::BROADCAST,
            src_port: 68,
            dst_port: 67,
        }
    }

    fn spec(msg: DhcpMessageType, yiaddr: Ipv4Addr) -> DhcpMessageSpec {
        DhcpMessageSpec {
            msg_type: msg,
            xid: 0x1234,
            client_mac: MacAddr::new(0x02, 0, 0, 0, 0, 1),
            yiaddr,
            hostname: None,
            vendor_class: None,
            param_req_list: None,
        }
    }

    #[test]
    fn ack_with_hostname() {
        let mut s = spec(DhcpMessageType::Ack, Ipv4Addr::new(10, 0, 0, 7));
        s.hostname = Some("alice-laptop".to_string());
        let ev = decode_dhcp(meta(), &encode_dhcp(&s)).unwrap();
        assert_eq!(ev.msg_type, DhcpMessageType::Ack);
        assert_eq!(ev.assigned_ip, Some(Ipv4Addr::new(10, 0, 0, 7)));
        assert_eq!(ev.hostname.as_deref(), Some("alice-laptop"));
        assert_eq!(ev.client_mac, MacAddr::new(0x02, 0, 0, 0, 0, 1));
    }

    #[test]
    fn discover_has_no_assigned_ip() {
        let mut s = spec(DhcpMessageType::Discover, Ipv4Addr::UNSPECIFIED);
        s.vendor_class = Some("android-dhcp-13".to_string());
        s.param_req_list = Some(vec![1, 3, 6, 15]);
        let ev = decode_dhcp(meta(), &encode_dhcp(&s)).unwrap();
        assert_eq!(ev.assigned_ip, None);
        assert_eq!(ev.vendor_class.as_deref(), Some("android-dhcp-13"));
        assert_eq!(ev.param_req_list, Some(vec![1, 3, 6, 15]));
    }

    #[test]
    fn missing_cookie() {
        let mut bytes = encode_dhcp(&spec(DhcpMessageType::Discover, Ipv4Addr::UNSPECIFIED));
        bytes[236] = 0;
        assert_eq!(decode_dhcp(meta(), &bytes), Err(Skip::NoCookie));
    }

    #[test]
    fn option_overrun_is_malformed() {
        let mut bytes = encode_dhcp(&spec(DhcpMessageType::Discover, Ipv4Addr::UNSPECIFIED));
        bytes.truncate(240);
        bytes.extend_from_slice(&[53, 1, 1, 12, 40, b'x']);
        assert_eq!(decode_dhcp(meta(), &bytes), Err(Skip::Malformed));
    }

    #[test]
    fn unknown_message_type_and_missing_type() {
        let mut bytes = encode_dhcp(&spec(DhcpMessageType::Discover, Ipv4Addr::UNSPECIFIED));
        bytes.truncate(240);
        bytes.extend_from_slice(&[53, 1, 8, 255]);
        assert_eq!(decode_dhcp(meta(), &bytes), Err(Skip::UnsupportedMessage));
        bytes.truncate(240);
        bytes.push(255);
        assert_eq!(decode_dhcp(meta(), &bytes), Err(Skip::Malformed));
    }
}
