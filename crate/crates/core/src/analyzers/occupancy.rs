use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::knowledge::DeviceRegistry;
use crate::pipeline::DeviceKey;
use crate::{MacAddr, Timestamp};

pub const DEFAULT_OCCUPANCY_WINDOW_SECS: u32 = 900;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyEstimate {
    /// `[start, end)` in whole seconds.
    pub start: Timestamp,
    pub end: Timestamp,
    pub present_persons: BTreeSet<String>,
    /// Active devices without a registered owner.
    pub unattributed_devices: usize,
}

impl OccupancyEstimate {
    pub fn count(&self) -> usize {
        self.present_persons.len()
    }
}

/// Windows of `window_secs` aligned to multiples of the window length,
/// tiling `[first, last]`.
pub fn occupancy_windows(first: Timestamp, last: Timestamp, window_secs: u32) -> Vec<(Timestamp, Timestamp)> {
    let w = window_secs.max(1);
    let mut start = first.secs / w * w;
    let mut out = Vec::new();
    loop {
        let end = start.saturating_add(w);
        out.push((Timestamp::from_secs(start), Timestamp::from_secs(end)));
        if last.secs < end || end == u32::MAX {
            break;
        }
        start = end;
    }
    out
}

/// `activity` holds one `(device, mac, ts)` per originated packet.
pub fn estimate_occupancy<I>(
    activity: I,
    span: (Timestamp, Timestamp),
    registry: &DeviceRegistry,
    window_secs: u32,
) -> Vec<OccupancyEstimate>
where
    I: IntoIterator<Item = (DeviceKey, Option<MacAddr>, Timestamp)>,
{
    let windows = occupancy_windows(span.0, span.1, window_secs);
    let origin = windows[0].0.secs;
    let w = window_secs.max(1);
    let mut active: BTreeMap<usize, BTreeMap<DeviceKey, Option<MacAddr>>> = BTreeMap::new();
    for (key, mac, ts) in activity {
        let i = (ts.secs.saturating_sub(origin) / w) as usize;
        if i < windows.len() {
            active.entry(i).or_default().insert(key, mac);
        }
    }
    windows
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| {
            let mut est = OccupancyEstimate {
                start,
                end,
                present_persons: BTreeSet::new(),
                unattributed_devices: 0,
            };
            for mac in active.get(&i).into_iter().flat_map(|m| m.values()) {
                match mac
                    .and_then(|m| registry.lookup_registration(m))
                    .and_then(|e| e.owner.clone())
                {
                    Some(person) => {
                        est.present_persons.insert(person);
                    }
                    None => est.unattributed_devices += 1,
                }
            }
            est
        })
        .collect()
}
