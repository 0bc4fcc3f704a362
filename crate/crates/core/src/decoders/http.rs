use alloc::string::{String, ToString};

use super::{EventMeta, HttpEvent, Skip};

/// Header section is only examined up to this many bytes.
pub const HTTP_HEAD_LIMIT: usize = 8 * 1024;

const METHODS: [&str; 6] = ["GET", "POST", "PUT", "HEAD", "DELETE", "OPTIONS"];

pub fn decode_http(meta: EventMeta, payload: &[u8]) -> Result<HttpEvent, Skip> {
    let method = METHODS
        .iter()
        .find(|m| payload.len() > m.len() && payload.starts_with(m.as_bytes()) && payload[m.len()] == b' ')
        .ok_or(Skip::NotRequest)?;
    let window = &payload[..payload.len().min(HTTP_HEAD_LIMIT)];
    let head_end = find(window, b"\r\n\r\n").unwrap_or(window.len());
    let head = String::from_utf8_lossy(&window[..head_end]);
    let mut lines = head.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));

    let request_line = lines.next().ok_or(Skip::NotRequest)?;
    let mut parts = request_line.split(' ').filter(|p| !p.is_empty());
    parts.next();
    let uri = parts.next().ok_or(Skip::NotRequest)?.to_string();

    let mut host = None;
    let mut user_agent = None;
    for line in lines {
        let Some((name, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let slot = if name.trim().eq_ignore_ascii_case("host") {
            &mut host
        } else if name.trim().eq_ignore_ascii_case("user-agent") {
            &mut user_agent
        } else {
            continue;
        };
        if slot.is_none() && !value.is_empty() {
            *slot = Some(value.to_string());
        }
    }
    Ok(HttpEvent {
        meta,
        method: method.to_string(),
        uri,
        host,
        user_agent,
    })
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}
