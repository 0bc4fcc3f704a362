//! In-process topic bus: ordered per-topic logs with independent cursors.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::AttributeClaim;
use crate::decoders::{FlowRecord, PacketObservation, ProtocolEvent};

/// Topics fed by ingest and the decoders.
pub mod topics {
    pub const PACKETS: &str = "packets";
    pub const FLOWS: &str = "flows";
    pub const DNS: &str = "dns";
    pub const DHCP: &str = "dhcp";
    pub const HTTP: &str = "http";
    pub const TLS: &str = "tls";

    pub const SOURCES: [&str; 6] = [PACKETS, FLOWS, DNS, DHCP, HTTP, TLS];
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Packet(PacketObservation),
    Flow(FlowRecord),
    Event(ProtocolEvent),
    Claim(AttributeClaim),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// 0-based position in the topic.
    pub seq: u64,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("topic name must be nonempty")]
    EmptyTopic,
}

/// Read position of one subscriber on one topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    topic: String,
    cursor: usize,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }
}

#[derive(Debug, Default)]
pub struct Bus {
    topics: BTreeMap<String, Vec<Envelope>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, topic: &str) -> Result<(), BusError> {
        if topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        self.topics.entry(topic.to_string()).or_default();
        Ok(())
    }

    /// Appends to `topic`, declaring it if needed. Returns the sequence number.
    pub fn publish(&mut self, topic: &str, message: Message) -> Result<u64, BusError> {
        if topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        let log = match self.topics.get_mut(topic) {
            Some(log) => log,
            None => self.topics.entry(topic.to_string()).or_default(),
        };
        let seq = log.len() as u64;
        log.push(Envelope { seq, message });
        Ok(seq)
    }

    /// A new subscriber starts at the beginning of the topic.
    pub fn subscribe(&self, topic: &str) -> Result<Subscription, BusError> {
        if !self.topics.contains_key(topic) {
            return Err(BusError::UnknownTopic(topic.to_string()));
        }
        Ok(Subscription {
            topic: topic.to_string(),
            cursor: 0,
        })
    }

    pub fn poll<'a>(&'a self, sub: &mut Subscription) -> Option<&'a Envelope> {
        let env = self.topics.get(&sub.topic)?.get(sub.cursor)?;
        sub.cursor += 1;
        Some(env)
    }

    pub fn topic_len(&self, topic: &str) -> u64 {
        self.topics.get(topic).map_or(0, |l| l.len() as u64)
    }

    pub fn topic_names(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::PacketObservation;
    use crate::{MacAddr, Timestamp};

    fn msg(n: u32) -> Message {
        Message::Packet(PacketObservation {
            ts: Timestamp::from_secs(n),
            src_mac: MacAddr::ZERO,
            dst_mac: MacAddr::ZERO,
            ethertype: 0x0800,
            frame_len: 60,
            src_ip: None,
            dst_ip: None,
            ip_len: 0,
        })
    }

    #[test]
    fn delivery_in_publish_order() {
        let mut bus = Bus::new();
        bus.publish("T", msg(1)).unwrap();
        bus.publish("T", msg(2)).unwrap();
        let mut s = bus.subscribe("T").unwrap();
        assert_eq!(bus.poll(&mut s).unwrap().message, msg(1));
        let second = bus.poll(&mut s).unwrap();
        assert_eq!((second.seq, &second.message), (1, &msg(2)));
        assert!(bus.poll(&mut s).is_none());
    }

    #[test]
    fn fan_out_to_every_subscriber() {
        let mut bus = Bus::new();
        bus.declare("T").unwrap();
        let mut a = bus.subscribe("T").unwrap();
        let mut b = bus.subscribe("T").unwrap();
        bus.publish("T", msg(1)).unwrap();
        bus.publish("T", msg(2)).unwrap();
        for s in [&mut a, &mut b] {
            let got: Vec<_> = core::iter::from_fn(|| bus.poll(s).map(|e| e.seq)).collect();
            assert_eq!(got, [0, 1]);
        }
    }

    #[test]
    fn unknown_topics() {
        let mut bus = Bus::new();
        assert_eq!(bus.subscribe(""), Err(BusError::UnknownTopic(String::new())));
        assert_eq!(bus.subscribe("never"), Err(BusError::UnknownTopic("never".into())));
        assert_eq!(bus.publish("", msg(0)), Err(BusError::EmptyTopic));
        assert_eq!(bus.declare(""), Err(BusError::EmptyTopic));
    }
}
