use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{certificate_common_names, EventMeta, Skip, TlsEvent, TlsStage};

const CONTENT_HANDSHAKE: u8 = 22;
const HS_CLIENT_HELLO: u8 = 1;
const HS_CERTIFICATE: u8 = 11;
const MAX_RECORD_LEN: usize = (1 << 14) + 2048;

/// Extracts the first ClientHello or Certificate handshake in a segment.
pub fn decode_tls(meta: EventMeta, payload: &[u8]) -> Result<TlsEvent, Skip> {
    let handshake = collect_handshake_bytes(payload)?;
    let mut pos = 0;
    while pos + 4 <= handshake.bytes.len() {
        let hs_type = handshake.bytes[pos];
        let len = be24(&handshake.bytes[pos + 1..]);
        let Some(body) = handshake.bytes.get(pos + 4..pos + 4 + len) else {
            return Err(if handshake.clipped {
                Skip::Truncated
            } else {
                Skip::Malformed
            });
        };
        match hs_type {
            HS_CLIENT_HELLO => return parse_client_hello(meta, body),
            HS_CERTIFICATE => return parse_certificate(meta, body),
            _ => pos += 4 + len,
        }
    }
    Err(Skip::NoHandshakeOfInterest)
}

struct HandshakeBytes {
    bytes: Vec<u8>,
    /// The last record extends past the end of the segment.
    clipped: bool,
}

/// Concatenates the bodies of leading handshake records.
fn collect_handshake_bytes(payload: &[u8]) -> Result<HandshakeBytes, Skip> {
    let mut out = HandshakeBytes {
        bytes: Vec::new(),
        clipped: false,
    };
    let mut pos = 0;
    while pos + 5 <= payload.len() {
        let ctype = payload[pos];
        if ctype != CONTENT_HANDSHAKE {
            if pos == 0 {
                return Err(Skip::NotHandshake);
            }
            break;
        }
        if payload[pos + 1] != 0x03 {
            return Err(Skip::Malformed);
        }
        let len = u16::from_be_bytes([payload[pos + 3], payload[pos + 4]]) as usize;
        if len == 0 || len > MAX_RECORD_LEN {
            return Err(Skip::Malformed);
        }
        let start = pos + 5;
        let end = start + len;
        if end > payload.len() {
            out.bytes.extend_from_slice(&payload[start..]);
            out.clipped = true;
            break;
        }
        out.bytes.extend_from_slice(&payload[start..end]);
        pos = end;
    }
    if out.bytes.is_empty() {
        return Err(if payload.first() == Some(&CONTENT_HANDSHAKE) {
            Skip::Truncated
        } else {
            Skip::NotHandshake
        });
    }
    Ok(out)
}

fn be24(b: &[u8]) -> usize {
    ((b[0] as usize) << 16) | ((b[1] as usize) << 8) | b[2] as usize
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Skip> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or(Skip::Malformed)?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, Skip> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, Skip> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn parse_client_hello(meta: EventMeta, body: &[u8]) -> Result<TlsEvent, Skip> {
    let mut c = Cursor { buf: body, pos: 0 };
    c.take(2 + 32)?;
    let sid_len = c.u8()? as usize;
    c.take(sid_len)?;
    let suites_len = c.u16()? as usize;
    if suites_len % 2 != 0 {
        return Err(Skip::Malformed);
    }
    let suites: Vec<u16> = c
        .take(suites_len)?
        .chunks_exact(2)
        .map(|p| u16::from_be_bytes([p[0], p[1]]))
        .collect();
    let comp_len = c.u8()? as usize;
    c.take(comp_len)?;

    let mut sni = None;
    if c.remaining() > 0 {
        let ext_len = c.u16()? as usize;
        let mut ext = Cursor {
            buf: c.take(ext_len)?,
            pos: 0,
        };
        while ext.remaining() > 0 {
            let ext_type = ext.u16()?;
            let len = ext.u16()? as usize;
            let data = ext.take(len)?;
            if ext_type == 0 && sni.is_none() {
                sni = parse_server_name(data)?;
            }
        }
    }
    Ok(TlsEvent {
        meta,
        stage: TlsStage::ClientHello,
        sni,
        cipher_suites: Some(suites),
        issuer_cn: None,
        subject_cn: None,
    })
}

fn parse_server_name(data: &[u8]) -> Result<Option<String>, Skip> {
    let mut c = Cursor { buf: data, pos: 0 };
    let list_len = c.u16()? as usize;
    let mut list = Cursor {
        buf: c.take(list_len)?,
        pos: 0,
    };
    while list.remaining() > 0 {
        let name_type = list.u8()?;
        let len = list.u16()? as usize;
        let name = list.take(len)?;
        if name_type == 0 {
            let s = String::from_utf8_lossy(name).to_ascii_lowercase();
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn parse_certificate(meta: EventMeta, body: &[u8]) -> Result<TlsEvent, Skip> {
    if body.len() < 3 {
        return Err(Skip::Malformed);
    }
    let list_len = be24(body);
    let list = body.get(3..3 + list_len).ok_or(Skip::Malformed)?;
    let (issuer_cn, subject_cn) = if list.len() >= 3 {
        let cert_len = be24(list);
        let der = list.get(3..3 + cert_len).ok_or(Skip::Malformed)?;
        certificate_common_names(der)
    } else {
        (None, None)
    };
    Ok(TlsEvent {
        meta,
        stage: TlsStage::Certificate,
        sni: None,
        cipher_suites: None,
        issuer_cn,
        subject_cn,
    })
}

/// Order-sensitive ClientHello fingerprint: suite ids as 4-digit lower-case
/// hex joined with `-`.
pub fn cipher_fingerprint(suites: &[u16]) -> String {
    let mut s = String::with_capacity(suites.len() * 5);
    for (i, id) in suites.iter().enumerate() {
        if i > 0 {
            s.push('-');
        }
        let _ = write!(s, "{id:04x}");
    }
    s
}
