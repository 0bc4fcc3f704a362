//! Minimal DER walk that pulls commonName out of a certificate's issuer and
//! subject names. No validation is performed.

use alloc::string::String;

const OID_COMMON_NAME: [u8; 3] = [0x55, 0x04, 0x03];

struct Tlv<'a> {
    tag: u8,
    value: &'a [u8],
}

/// Splits one TLV off the front of `buf`.
fn read_tlv(buf: &[u8]) -> Option<(Tlv<'_>, &[u8])> {
    let tag = *buf.first()?;
    let first = *buf.get(1)? as usize;
    let (len, hdr) = if first < 0x80 {
        (first, 2)
    } else {
        let n = first & 0x7f;
        if n == 0 || n > 4 {
            return None;
        }
        let mut len = 0usize;
        for b in buf.get(2..2 + n)? {
            len = (len << 8) | *b as usize;
        }
        (len, 2 + n)
    };
    let value = buf.get(hdr..hdr.checked_add(len)?)?;
    Some((Tlv { tag, value }, &buf[hdr + len..]))
}

/// Returns `(issuer_cn, subject_cn)` for a DER certificate.
pub fn certificate_common_names(der: &[u8]) -> (Option<String>, Option<String>) {
    fn inner(der: &[u8]) -> Option<(Option<String>, Option<String>)> {
        let (cert, _) = read_tlv(der)?;
        if cert.tag != 0x30 {
            return None;
        }
        let (tbs, _) = read_tlv(cert.value)?;
        if tbs.tag != 0x30 {
            return None;
        }
        let mut rest = tbs.value;
        let (mut el, mut next) = read_tlv(rest)?;
        if el.tag == 0xa0 {
            rest = next;
            (el, next) = read_tlv(rest)?;
        }
        // serialNumber
        if el.tag != 0x02 {
            return None;
        }
        let (sig_alg, next) = read_tlv(next)?;
        if sig_alg.tag != 0x30 {
            return None;
        }
        let (issuer, next) = read_tlv(next)?;
        let (_validity, next) = read_tlv(next)?;
        let subject = read_tlv(next).map(|(s, _)| s);
        Some((common_name(&issuer), subject.and_then(|s| common_name(&s))))
    }
    inner(der).unwrap_or((None, None))
}

fn common_name(name: &Tlv<'_>) -> Option<String> {
    if name.tag != 0x30 {
        return None;
    }
    let mut rdns = name.value;
    while !rdns.is_empty() {
        let (set, rest) = read_tlv(rdns)?;
        rdns = rest;
        if set.tag != 0x31 {
            continue;
        }
        let mut attrs = set.value;
        while !attrs.is_empty() {
            let (attr, rest) = read_tlv(attrs)?;
            attrs = rest;
            let (oid, after) = read_tlv(attr.value)?;
            if oid.tag == 0x06 && oid.value == OID_COMMON_NAME {
                let (val, _) = read_tlv(after)?;
                return decode_string(&val);
            }
        }
    }
    None
}

fn decode_string(v: &Tlv<'_>) -> Option<String> {
    match v.tag {
        // UTF8String, PrintableString, T61String, IA5String
        0x0c | 0x13 | 0x14 | 0x16 => Some(String::from_utf8_lossy(v.value).into_owned()),
        // BMPString
        0x1e => {
            let units = v.value.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]));
            Some(
                char::decode_utf16(units)
                    .map(|r| r.unwrap_or(char::REPLACEMENT_CHARACTER))
                    .collect(),
            )
        }
        _ => None,
    }
}
