use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use super::{TcpFlags, TransportKind, TransportSegment};
use crate::Timestamp;

pub const DEFAULT_FLOW_TIMEOUT_SECS: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: Ipv4Addr,
    pub port: u16,
}

impl Endpoint {
    pub const fn new(ip: Ipv4Addr, port: u16) -> Self {
        Endpoint { ip, port }
    }
}

impl core::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

/// Direction of a packet relative to the canonical key order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Sent from `lo` to `hi`.
    Forward,
    Reverse,
}

/// Five-tuple in normal form: the smaller `(ip, port)` endpoint is `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub kind: TransportKind,
}

impl FlowKey {
    pub fn from_packet(src: Endpoint, dst: Endpoint, kind: TransportKind) -> (FlowKey, Direction) {
        if src <= dst {
            (FlowKey { lo: src, hi: dst, kind }, Direction::Forward)
        } else {
            (FlowKey { lo: dst, hi: src, kind }, Direction::Reverse)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub key: FlowKey,
    /// Source of the first packet seen.
    pub originator: Endpoint,
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    pub pkts_orig: u64,
    pub pkts_resp: u64,
    pub bytes_orig: u64,
    pub bytes_resp: u64,
}

impl FlowRecord {
    pub fn responder(&self) -> Endpoint {
        if self.originator == self.key.lo {
            self.key.hi
        } else {
            self.key.lo
        }
    }

    /// True when the originator is the `lo` endpoint of the key.
    pub fn originator_is_lo(&self) -> bool {
        self.originator == self.key.lo
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_orig + self.bytes_resp
    }

    pub fn total_packets(&self) -> u64 {
        self.pkts_orig + self.pkts_resp
    }
}

/// Whether a TCP data segment continues its direction's byte stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentOrder {
    InOrder,
    Reordered,
}

#[derive(Debug)]
struct FlowState {
    record: FlowRecord,
    /// Expected next sequence number, indexed by [from originator, from responder].
    next_seq: [Option<u32>; 2],
}

/// Open flows keyed by canonical five-tuple with idle-timeout expiry.
#[derive(Debug)]
pub struct FlowTable {
    timeout_micros: u64,
    active: BTreeMap<FlowKey, FlowState>,
    last_sweep: u64,
}

impl FlowTable {
    pub fn new(timeout_secs: u64) -> Self {
        FlowTable {
            timeout_micros: timeout_secs.saturating_mul(1_000_000),
            active: BTreeMap::new(),
            last_sweep: 0,
        }
    }

    pub fn open_flows(&self) -> usize {
        self.active.len()
    }

    /// Accounts one packet; flows that went idle are appended to `expired`.
    pub fn observe(
        &mut self,
        ts: Timestamp,
        src: Endpoint,
        dst: Endpoint,
        segment: &TransportSegment<'_>,
        bytes: u64,
        expired: &mut Vec<FlowRecord>,
    ) -> SegmentOrder {
        let now = ts.as_micros();
        if now.saturating_sub(self.last_sweep) > self.timeout_micros {
            self.sweep(now, expired);
            self.last_sweep = now;
        }
        let (key, _) = FlowKey::from_packet(src, dst, segment.kind);
        if let Some(state) = self.active.get(&key) {
            if now.saturating_sub(state.record.last_ts.as_micros()) > self.timeout_micros {
                let state = self.active.remove(&key).expect("present");
                expired.push(state.record);
            }
        }
        let state = self.active.entry(key).or_insert_with(|| FlowState {
            record: FlowRecord {
                key,
                originator: src,
                first_ts: ts,
                last_ts: ts,
                pkts_orig: 0,
                pkts_resp: 0,
                bytes_orig: 0,
                bytes_resp: 0,
            },
            next_seq: [None, None],
        });
        let rec = &mut state.record;
        let from_orig = rec.originator == src;
        if from_orig {
            rec.pkts_orig += 1;
            rec.bytes_orig += bytes;
        } else {
            rec.pkts_resp += 1;
            rec.bytes_resp += bytes;
        }
        if ts > rec.last_ts {
            rec.last_ts = ts;
        }
        if ts < rec.first_ts {
            rec.first_ts = ts;
        }

        let Some(tcp) = segment.tcp else {
            return SegmentOrder::InOrder;
        };
        let slot = &mut state.next_seq[usize::from(!from_orig)];
        let len = segment.payload.len() as u32;
        let syn = tcp.flags.contains(TcpFlags::SYN);
        let fin = tcp.flags.contains(TcpFlags::FIN);
        if !syn && len == 0 && !fin {
            return SegmentOrder::InOrder;
        }
        if !syn {
            if let Some(expected) = *slot {
                if expected != tcp.seq {
                    return SegmentOrder::Reordered;
                }
            }
        }
        let consumed = len + u32::from(syn) + u32::from(fin);
        *slot = Some(tcp.seq.wrapping_add(consumed));
        SegmentOrder::InOrder
    }

    fn sweep(&mut self, now: u64, expired: &mut Vec<FlowRecord>) {
        let timeout = self.timeout_micros;
        let idle: Vec<FlowKey> = self
            .active
            .iter()
            .filter(|(_, s)| now.saturating_sub(s.record.last_ts.as_micros()) > timeout)
            .map(|(k, _)| *k)
            .collect();
        let mut out: Vec<FlowRecord> = idle
            .into_iter()
            .filter_map(|k| self.active.remove(&k).map(|s| s.record))
            .collect();
        out.sort_by_key(|r| (r.first_ts, r.key));
        expired.extend(out);
    }

    /// Emits every open flow, ordered by first timestamp then key.
    pub fn drain_all(&mut self) -> Vec<FlowRecord> {
        let mut out: Vec<FlowRecord> = core::mem::take(&mut self.active)
            .into_values()
            .map(|s| s.record)
            .collect();
        out.sort_by_key(|r| (r.first_ts, r.key));
        out
    }
}

/// Assembles flows from an ordered stream of addressed segments.
pub fn assemble_flows<'a, I>(segments: I, timeout_secs: u64) -> Vec<FlowRecord>
where
    I: IntoIterator<Item = (Timestamp, Endpoint, Endpoint, TransportSegment<'a>, u64)>,
{
    let mut table = FlowTable::new(timeout_secs);
    let mut out = Vec::new();
    for (ts, src, dst, seg, bytes) in segments {
        table.observe(ts, src, dst, &seg, bytes, &mut out);
    }
    out.extend(table.drain_all());
    out
}
