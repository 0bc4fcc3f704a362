//! Time-series behavior characterization.
//!
//! Traffic a device originates is binned into fixed windows aligned to the
//! start of the observation span. The periodicity score is the largest
//! normalized autocorrelation `Σ x[t]·x[t+k] / Σ x[t]²` over lags
//! `2..=L/2`; for non-negative series it lies in `[0, 1]`.

use alloc::vec::Vec;

use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BehaviorMode {
    Idle,
    PeriodicBeacon,
    Interactive,
    Streaming,
}

impl BehaviorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BehaviorMode::Idle => "idle",
            BehaviorMode::PeriodicBeacon => "periodic_beacon",
            BehaviorMode::Interactive => "interactive",
            BehaviorMode::Streaming => "streaming",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorParams {
    pub window_secs: u32,
    pub periodicity_threshold: f64,
    pub idle_bytes: f64,
    pub streaming_bytes: f64,
    pub streaming_max_burstiness: f64,
    pub min_windows: usize,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            window_secs: 60,
            periodicity_threshold: 0.7,
            idle_bytes: 1024.0,
            streaming_bytes: 100.0 * 1024.0,
            streaming_max_burstiness: 0.5,
            min_windows: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowStats {
    pub bytes: u64,
    pub pkts: u64,
    pub flows: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub window_secs: u32,
    pub start: Timestamp,
    pub series: Vec<WindowStats>,
    pub mean_bytes: f64,
    pub periodicity_score: f64,
    pub burstiness: f64,
    pub mode: BehaviorMode,
}

/// `ceil(span / window)`, at least 1.
pub fn window_count(start: Timestamp, end: Timestamp, window_secs: u32) -> usize {
    let w = u64::from(window_secs.max(1)) * 1_000_000;
    let span = end.as_micros().saturating_sub(start.as_micros());
    (span.div_ceil(w) as usize).max(1)
}

fn window_index(ts: Timestamp, start: Timestamp, window_secs: u32, len: usize) -> usize {
    let w = u64::from(window_secs.max(1)) * 1_000_000;
    let i = ts.as_micros().saturating_sub(start.as_micros()) / w;
    (i as usize).min(len - 1)
}

pub fn periodicity_score(series: &[f64]) -> f64 {
    let energy: f64 = series.iter().map(|x| x * x).sum();
    if energy <= 0.0 {
        return 0.0;
    }
    let l = series.len();
    let mut best = 0.0f64;
    for k in 2..=l / 2 {
        let r: f64 = series[..l - k].iter().zip(&series[k..]).map(|(a, b)| a * b).sum();
        best = best.max(r / energy);
    }
    best.clamp(0.0, 1.0)
}

/// Coefficient of variation (population standard deviation over mean).
pub fn burstiness(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    libm::sqrt(var) / mean
}

/// Beacon is tested first so that small periodic senders are not Idle.
pub fn classify_mode(mean_bytes: f64, periodicity: f64, burst: f64, p: &BehaviorParams) -> BehaviorMode {
    if periodicity >= p.periodicity_threshold && mean_bytes < p.streaming_bytes {
        BehaviorMode::PeriodicBeacon
    } else if mean_bytes < p.idle_bytes {
        BehaviorMode::Idle
    } else if mean_bytes >= p.streaming_bytes && burst < p.streaming_max_burstiness {
        BehaviorMode::Streaming
    } else {
        BehaviorMode::Interactive
    }
}

/// `packets` are `(ts, bytes)` the device originated, `flow_starts` the
/// first timestamps of flows it originated. Silent when the span covers
/// fewer than `min_windows` windows.
pub fn characterize_behavior<P, F>(
    packets: P,
    flow_starts: F,
    span: (Timestamp, Timestamp),
    params: &BehaviorParams,
) -> Option<BehaviorProfile>
where
    P: IntoIterator<Item = (Timestamp, u64)>,
    F: IntoIterator<Item = Timestamp>,
{
    let (start, end) = span;
    let len = window_count(start, end, params.window_secs);
    if len < params.min_windows {
        return None;
    }
    let mut series = alloc::vec![WindowStats::default(); len];
    for (ts, bytes) in packets {
        let w = &mut series[window_index(ts, start, params.window_secs, len)];
        w.bytes += bytes;
        w.pkts += 1;
    }
    for ts in flow_starts {
        series[window_index(ts, start, params.window_secs, len)].flows += 1;
    }
    let bytes: Vec<f64> = series.iter().map(|w| w.bytes as f64).collect();
    let mean_bytes = bytes.iter().sum::<f64>() / len as f64;
    let periodicity_score = periodicity_score(&bytes);
    let burstiness = burstiness(&bytes);
    Some(BehaviorProfile {
        window_secs: params.window_secs,
        start,
        series,
        mean_bytes,
        periodicity_score,
        burstiness,
        mode: classify_mode(mean_bytes, periodicity_score, burstiness, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: u32) -> Timestamp {
        Timestamp::from_secs(s)
    }

    /// Direct evaluation of the autocorrelation definition.
    fn oracle(x: &[f64]) -> f64 {
        let e: f64 = x.iter().map(|v| v * v).sum();
        if e == 0.0 {
            return 0.0;
        }
        let mut best = 0.0;
        let mut k = 2;
        while k <= x.len() / 2 {
            let mut acc = 0.0;
            for t in 0..x.len() - k {
                acc += x[t] * x[t + k];
            }
            if acc / e > best {
                best = acc / e;
            }
            k += 1;
        }
        best
    }

    #[test]
    fn beacon_every_window() {
        let pkts: Vec<_> = (0..30).map(|i| (ts(1000 + 60 * i + 7), 200)).collect();
        let b = characterize_behavior(pkts, [], (ts(1000), ts(1000 + 1800)), &BehaviorParams::default()).unwrap();
        assert_eq!(b.series.len(), 30);
        assert!(b.series.iter().all(|w| w.bytes == 200));
        assert!((b.periodicity_score - 28.0 / 30.0).abs() < 1e-12);
        assert_eq!(b.mode, BehaviorMode::PeriodicBeacon);
    }

    #[test]
    fn beacon_every_other_window_peaks_at_lag_two() {
        let x: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 300.0 } else { 0.0 }).collect();
        assert!((periodicity_score(&x) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn constant_stream() {
        let pkts: Vec<_> = (0..10).map(|i| (ts(60 * i + 30), 500 * 1024)).collect();
        let b = characterize_behavior(pkts, [], (ts(0), ts(600)), &BehaviorParams::default()).unwrap();
        assert_eq!(b.burstiness, 0.0);
        assert_eq!(b.mode, BehaviorMode::Streaming);
    }

    #[test]
    fn all_zero_is_idle() {
        assert_eq!(periodicity_score(&[0.0; 10]), 0.0);
        assert_eq!(burstiness(&[0.0; 10]), 0.0);
        assert_eq!(
            classify_mode(0.0, 0.0, 0.0, &BehaviorParams::default()),
            BehaviorMode::Idle
        );
        let b = characterize_behavior([], [], (ts(0), ts(600)), &BehaviorParams::default()).unwrap();
        assert_eq!(b.mode, BehaviorMode::Idle);
    }

    #[test]
    fn short_span_is_silent() {
        assert!(characterize_behavior([(ts(0), 1)], [], (ts(0), ts(120)), &BehaviorParams::default()).is_none());
        assert_eq!(window_count(ts(0), ts(120), 60), 2);
        assert_eq!(window_count(ts(0), ts(121), 60), 3);
        assert_eq!(window_count(ts(5), ts(5), 60), 1);
    }

    #[test]
    fn last_packet_clamps_into_last_window() {
        let b = characterize_behavior([(ts(180), 9)], [ts(180)], (ts(0), ts(180)), &BehaviorParams::default()).unwrap();
        assert_eq!(b.series.len(), 3);
        assert_eq!(
            b.series[2],
            WindowStats {
                bytes: 9,
                pkts: 1,
                flows: 1
            }
        );
    }

    #[test]
    fn bursty_traffic_is_interactive() {
        let x = [50_000.0, 0.0, 0.0, 3_000.0, 0.0, 120_000.0, 0.0, 0.0, 9_000.0, 0.0];
        let mean = x.iter().sum::<f64>() / 10.0;
        let m = classify_mode(mean, periodicity_score(&x), burstiness(&x), &BehaviorParams::default());
        assert_eq!(m, BehaviorMode::Interactive);
    }

    proptest! {
        #[test]
        fn score_matches_definition(x in proptest::collection::vec(0.0f64..1e6, 0..80)) {
            let s = periodicity_score(&x);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((s - oracle(&x)).abs() < 1e-9);
        }

        #[test]
        fn mode_invariant_under_translation(
            pkts in proptest::collection::vec((0u32..3600, 1u64..200_000), 1..200),
            shift in 0u32..1_000_000,
        ) {
            let span = |d: u32| (ts(d), ts(d + 3600));
            let p = BehaviorParams::default();
            let a = characterize_behavior(pkts.iter().map(|(t, b)| (ts(*t), *b)), [], span(0), &p).unwrap();
            let b = characterize_behavior(pkts.iter().map(|(t, b)| (ts(t + shift), *b)), [], span(shift), &p).unwrap();
            prop_assert_eq!(a.series, b.series);
            prop_assert_eq!(a.mode, b.mode);
        }
    }
}
