use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use super::{DnsEvent, EventMeta, Skip};

const MAX_POINTER_JUMPS: usize = 32;
const MAX_NAME_LEN: usize = 255;

/// Reads a possibly compressed domain name starting at `offset`.
///
/// Returns the lower-cased dotted name and the offset just past the name
/// in the original position (after the first pointer when compressed).
pub fn read_name(msg: &[u8], offset: usize) -> Result<(String, usize), Skip> {
    let mut name = String::new();
    let mut pos = offset;
    let mut resume = None;
    let mut jumps = 0;
    loop {
        let len = *msg.get(pos).ok_or(Skip::Malformed)? as usize;
        match len & 0xc0 {
            0x00 if len == 0 => {
                let end = resume.unwrap_or(pos + 1);
                return Ok((name, end));
            }
            0x00 => {
                let label = msg.get(pos + 1..pos + 1 + len).ok_or(Skip::Malformed)?;
                if !name.is_empty() {
                    name.push('.');
                }
                for &b in label {
                    name.push(if b.is_ascii() {
                        char::from(b.to_ascii_lowercase())
                    } else {
                        char::REPLACEMENT_CHARACTER
                    });
                }
                if name.len() > MAX_NAME_LEN {
                    return Err(Skip::Malformed);
                }
                pos += 1 + len;
            }
            0xc0 => {
                let lo = *msg.get(pos + 1).ok_or(Skip::Malformed)? as usize;
                if resume.is_none() {
                    resume = Some(pos + 2);
                }
                jumps += 1;
                if jumps > MAX_POINTER_JUMPS {
                    return Err(Skip::Malformed);
                }
                pos = ((len & 0x3f) << 8) | lo;
            }
            _ => return Err(Skip::Malformed),
        }
    }
}

fn be16(msg: &[u8], at: usize) -> Result<u16, Skip> {
    msg.get(at..at + 2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .ok_or(Skip::Malformed)
}

/// Decodes the header, first question and all A answers of a DNS message.
pub fn decode_dns(meta: EventMeta, payload: &[u8]) -> Result<DnsEvent, Skip> {
    if payload.len() < 12 {
        return Err(Skip::Malformed);
    }
    let flags = be16(payload, 2)?;
    let is_response = flags & 0x8000 != 0;
    let qdcount = be16(payload, 4)? as usize;
    let ancount = be16(payload, 6)? as usize;
    let nscount = be16(payload, 8)? as usize;
    let arcount = be16(payload, 10)? as usize;
    // smallest question is 5 bytes, smallest resource record 11
    if qdcount == 0 || qdcount * 5 + (ancount + nscount + arcount) * 11 > payload.len() - 12 {
        return Err(Skip::Malformed);
    }

    let (query_name, mut pos) = read_name(payload, 12)?;
    let qtype = be16(payload, pos)?;
    be16(payload, pos + 2)?;
    pos += 4;
    for _ in 1..qdcount {
        let (_, next) = read_name(payload, pos)?;
        be16(payload, next + 2)?;
        pos = next + 4;
    }

    let mut answers = Vec::new();
    for _ in 0..ancount {
        let (owner, next) = read_name(payload, pos)?;
        let rtype = be16(payload, next)?;
        let class = be16(payload, next + 2)?;
        let rdlen = be16(payload, next + 8)? as usize;
        let rdata = payload.get(next + 10..next + 10 + rdlen).ok_or(Skip::Malformed)?;
        if rtype == 1 && class == 1 && rdlen == 4 {
            answers.push((owner, Ipv4Addr::new(rdata[0], rdata[1], rdata[2], rdata[3])));
        }
        pos = next + 10 + rdlen;
    }
    if !is_response {
        answers.clear();
    }
    Ok(DnsEvent {
        meta,
        query_name,
        qtype,
        answers,
        is_response,
    })
}
