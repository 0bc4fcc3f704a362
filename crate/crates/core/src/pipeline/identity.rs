//! Device identity binding.
//!
//! DHCP Acks split an address into epochs: a new epoch starts exactly at an
//! Ack that hands the address to a different MAC, and every epoch is keyed
//! by its client MAC. Traffic on a leased address before its first Ack
//! falls into pseudo-epoch 0, keyed `(ip, 0)`.
//!
//! Addresses never leased are bound statically: when one MAC is the only
//! source of an address and that MAC sources no other internal address, the
//! device is keyed by the MAC; otherwise by `(ip, 0)` with the MAC attached
//! when it is unique.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;
use core::str::FromStr;

use crate::decoders::{DhcpEvent, DhcpMessageType, PacketObservation};
use crate::{is_internal_ip, MacAddr, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceKey {
    Mac(MacAddr),
    Ip { ip: Ipv4Addr, epoch: u32 },
}

impl DeviceKey {
    pub fn mac(&self) -> Option<MacAddr> {
        match self {
            DeviceKey::Mac(m) => Some(*m),
            DeviceKey::Ip { .. } => None,
        }
    }
}

impl fmt::Display for DeviceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceKey::Mac(m) => write!(f, "mac:{m}"),
            DeviceKey::Ip { ip, epoch } => write!(f, "ip:{ip}#{epoch}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid device key")]
pub struct ParseDeviceKeyError;

impl FromStr for DeviceKey {
    type Err = ParseDeviceKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(m) = s.strip_prefix("mac:") {
            return m.parse().map(DeviceKey::Mac).map_err(|_| ParseDeviceKeyError);
        }
        let rest = s.strip_prefix("ip:").ok_or(ParseDeviceKeyError)?;
        let (ip, epoch) = rest.split_once('#').ok_or(ParseDeviceKeyError)?;
        Ok(DeviceKey::Ip {
            ip: ip.parse().map_err(|_| ParseDeviceKeyError)?,
            epoch: epoch.parse().map_err(|_| ParseDeviceKeyError)?,
        })
    }
}

/// Half-open `[start, end)` interval during which `ip` belonged to a device.
/// Missing bounds are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct IpEpoch {
    pub ip: Ipv4Addr,
    pub start: Option<Timestamp>,
    pub end: Option<Timestamp>,
}

impl IpEpoch {
    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start.map_or(true, |s| ts >= s) && self.end.map_or(true, |e| ts < e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceIdentity {
    pub key: DeviceKey,
    pub mac: Option<MacAddr>,
    pub epochs: Vec<IpEpoch>,
    /// Other MACs seen sourcing this identity's address without DHCP
    /// evidence; nonempty means the binding is ambiguous.
    pub conflicting_macs: Vec<MacAddr>,
}

impl DeviceIdentity {
    pub fn is_ambiguous(&self) -> bool {
        !self.conflicting_macs.is_empty()
    }
}

/// Maps `(ip, ts)` to device keys.
#[derive(Debug, Clone, Default)]
pub struct IdentityResolver {
    /// Epoch starts per leased address, ascending.
    leases: BTreeMap<Ipv4Addr, Vec<(Timestamp, MacAddr)>>,
    statics: BTreeMap<Ipv4Addr, DeviceKey>,
    dhcp_clients: BTreeSet<MacAddr>,
    identities: BTreeMap<DeviceKey, DeviceIdentity>,
}

impl IdentityResolver {
    /// Device owning internal address `ip` at `ts`; `None` for external
    /// addresses.
    pub fn resolve(&self, ip: Ipv4Addr, ts: Timestamp) -> Option<DeviceKey> {
        if let Some(starts) = self.leases.get(&ip) {
            let i = starts.partition_point(|(t, _)| *t <= ts);
            return Some(match i {
                0 => DeviceKey::Ip { ip, epoch: 0 },
                _ => DeviceKey::Mac(starts[i - 1].1),
            });
        }
        if let Some(k) = self.statics.get(&ip) {
            return Some(*k);
        }
        is_internal_ip(ip).then_some(DeviceKey::Ip { ip, epoch: 0 })
    }

    /// Device that sent a frame: unspecified-address senders (DHCP clients
    /// before a lease) are keyed by MAC.
    pub fn resolve_source(&self, ip: Ipv4Addr, mac: MacAddr, ts: Timestamp) -> Option<DeviceKey> {
        if ip.is_unspecified() {
            return Some(DeviceKey::Mac(mac));
        }
        self.resolve(ip, ts)
    }

    pub fn is_dhcp_client(&self, mac: MacAddr) -> bool {
        self.dhcp_clients.contains(&mac)
    }

    pub fn identity(&self, key: &DeviceKey) -> Option<&DeviceIdentity> {
        self.identities.get(key)
    }

    pub fn identities(&self) -> impl Iterator<Item = &DeviceIdentity> {
        self.identities.values()
    }

    /// MAC associated with a key, directly or through a unique static binding.
    pub fn mac_of(&self, key: &DeviceKey) -> Option<MacAddr> {
        key.mac().or_else(|| self.identities.get(key).and_then(|i| i.mac))
    }
}

pub fn bind_identity<'a, D, P>(dhcp: D, packets: P) -> IdentityResolver
where
    D: IntoIterator<Item = &'a DhcpEvent>,
    P: IntoIterator<Item = &'a PacketObservation>,
{
    let mut r = IdentityResolver::default();
    let mut acks: Vec<(Timestamp, usize, Ipv4Addr, MacAddr)> = Vec::new();
    for (i, ev) in dhcp.into_iter().enumerate() {
        r.dhcp_clients.insert(ev.client_mac);
        if ev.msg_type == DhcpMessageType::Ack {
            if let Some(ip) = ev.assigned_ip {
                acks.push((ev.meta.ts, i, ip, ev.client_mac));
            }
        }
    }
    acks.sort();
    for (ts, _, ip, mac) in acks {
        let starts = r.leases.entry(ip).or_default();
        if starts.last().map(|(_, m)| *m) != Some(mac) {
            starts.push((ts, mac));
        }
    }

    // Static evidence: sources on addresses outside any lease epoch.
    let mut macs_by_ip: BTreeMap<Ipv4Addr, BTreeSet<MacAddr>> = BTreeMap::new();
    let mut ips_by_mac: BTreeMap<MacAddr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    for p in packets {
        let Some(ip) = p.src_ip else { continue };
        if ip.is_unspecified() || !is_internal_ip(ip) {
            continue;
        }
        let leased = r.leases.get(&ip).is_some_and(|s| s[0].0 <= p.ts);
        if leased {
            continue;
        }
        macs_by_ip.entry(ip).or_default().insert(p.src_mac);
        ips_by_mac.entry(p.src_mac).or_default().insert(ip);
    }

    for (ip, macs) in &macs_by_ip {
        let unique = (macs.len() == 1).then(|| *macs.first().expect("nonempty"));
        let conflicting_macs = if unique.is_some() {
            Vec::new()
        } else {
            macs.iter().copied().collect()
        };
        if let Some(starts) = r.leases.get(ip) {
            // pre-lease traffic: pseudo-epoch 0
            let key = DeviceKey::Ip { ip: *ip, epoch: 0 };
            r.identities.insert(
                key,
                DeviceIdentity {
                    key,
                    mac: unique,
                    epochs: alloc::vec![IpEpoch {
                        ip: *ip,
                        start: None,
                        end: Some(starts[0].0),
                    }],
                    conflicting_macs,
                },
            );
            continue;
        }
        let key = match unique {
            Some(m) if ips_by_mac[&m].len() == 1 && !r.dhcp_clients.contains(&m) => DeviceKey::Mac(m),
            _ => DeviceKey::Ip { ip: *ip, epoch: 0 },
        };
        r.statics.insert(*ip, key);
        r.identities.insert(
            key,
            DeviceIdentity {
                key,
                mac: unique,
                epochs: alloc::vec![IpEpoch {
                    ip: *ip,
                    start: None,
                    end: None,
                }],
                conflicting_macs,
            },
        );
    }

    for mac in &r.dhcp_clients {
        let key = DeviceKey::Mac(*mac);
        r.identities.entry(key).or_insert(DeviceIdentity {
            key,
            mac: Some(*mac),
            epochs: Vec::new(),
            conflicting_macs: Vec::new(),
        });
    }
    for (ip, starts) in &r.leases {
        for (i, (start, mac)) in starts.iter().enumerate() {
            let end = starts.get(i + 1).map(|(t, _)| *t);
            let id = r.identities.get_mut(&DeviceKey::Mac(*mac)).expect("client identity");
            id.epochs.push(IpEpoch {
                ip: *ip,
                start: Some(*start),
                end,
            });
        }
    }
    for id in r.identities.values_mut() {
        id.epochs.sort();
    }
    r
}
