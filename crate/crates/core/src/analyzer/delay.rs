use std::collections::BTreeMap;

use serde::Serialize;

use crate::capture::CaptureRecord;
use crate::codec::{decode_header, goose_key, MacAddress, ETHERTYPE_GOOSE};
use crate::netsim::IFG_PREAMBLE_BYTES;

use super::AnalyzerError;

/// Default pairing window.
pub const DEFAULT_WINDOW_NS: u64 = 1_000_000_000;
/// Default violation threshold.
pub const DEFAULT_THRESHOLD_NS: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchKey {
    pub src: MacAddress,
    pub st_num: u32,
    pub sq_num: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySample {
    pub key: MatchKey,
    pub t_pub_ns: u64,
    pub t_sub_ns: u64,
    pub delay_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Filtered {
    pub records: Vec<CaptureRecord>,
    /// Frames that were not even decodable as Ethernet.
    pub undecodable: usize,
}

/// GOOSE frames from `src`. Frames whose header does not decode are
/// skipped and counted.
pub fn filter_goose(records: &[CaptureRecord], src: MacAddress) -> Filtered {
    let mut out = Filtered::default();
    for r in records {
        match decode_header(r.data()) {
            Ok(h) if h.ethertype == ETHERTYPE_GOOSE && h.src == src => out.records.push(r.clone()),
            Ok(_) => {}
            Err(_) => out.undecodable += 1,
        }
    }
    out
}

/// Key of a GOOSE capture, or `None` if it is not a complete GOOSE frame.
pub fn match_key(record: &CaptureRecord) -> Option<MatchKey> {
    let data = record.data();
    let h = decode_header(data).ok()?;
    if h.ethertype != ETHERTYPE_GOOSE {
        return None;
    }
    let (st_num, sq_num) = goose_key(&data[h.payload_offset..]).ok()?;
    Some(MatchKey {
        src: h.src,
        st_num,
        sq_num,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchOutcome {
    /// In publisher timestamp order.
    pub samples: Vec<DelaySample>,
    pub unmatched_pub: usize,
    pub unmatched_sub: usize,
    /// Records on either side without a readable GOOSE PDU.
    pub undecodable: usize,
}

/// Pairs every publisher capture with the earliest unused subscriber
/// capture of the same key that is no earlier and at most `window_ns`
/// later. Input order does not matter.
pub fn match_pairs(
    publisher: &[CaptureRecord],
    subscriber: &[CaptureRecord],
    window_ns: u64,
) -> MatchOutcome {
    let mut out = MatchOutcome::default();
    let mut pubs: Vec<(u64, MatchKey)> = Vec::with_capacity(publisher.len());
    for r in publisher {
        match match_key(r) {
            Some(k) => pubs.push((r.timestamp_ns, k)),
            None => out.undecodable += 1,
        }
    }
    pubs.sort_unstable();
    // per key: subscriber timestamps (sorted) and a used flag
    let mut subs: BTreeMap<MatchKey, Vec<(u64, bool)>> = BTreeMap::new();
    for r in subscriber {
        match match_key(r) {
            Some(k) => subs.entry(k).or_default().push((r.timestamp_ns, false)),
            None => out.undecodable += 1,
        }
    }
    for v in subs.values_mut() {
        v.sort_unstable();
    }
    for (t_pub, key) in pubs {
        let candidate = subs.get_mut(&key).and_then(|v| {
            v.iter_mut()
                .find(|(t, used)| !*used && *t >= t_pub && *t - t_pub <= window_ns)
        });
        match candidate {
            Some((t_sub, used)) => {
                *used = true;
                out.samples.push(DelaySample {
                    key,
                    t_pub_ns: t_pub,
                    t_sub_ns: *t_sub,
                    delay_ns: *t_sub - t_pub,
                });
            }
            None => out.unmatched_pub += 1,
        }
    }
    out.unmatched_sub = subs
        .values()
        .flat_map(|v| v.iter())
        .filter(|(_, used)| !used)
        .count();
    out
}

/// `t_des - t_tr`, refusing a subscriber time before the publisher time.
pub fn ete_delay(t_tr_ns: u64, t_des_ns: u64) -> Result<u64, AnalyzerError> {
    t_des_ns
        .checked_sub(t_tr_ns)
        .ok_or(AnalyzerError::Ordering {
            t_tr_ns,
            t_des_ns,
        })
}

/// Statistics over delay samples. Statistics of an empty sample set are
/// `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    pub count: usize,
    pub sum_ns: u128,
    pub mean_ns: Option<f64>,
    pub min_ns: Option<u64>,
    pub max_ns: Option<u64>,
    /// Population standard deviation.
    pub stddev_ns: Option<f64>,
    pub threshold_ns: u64,
    /// Samples strictly above the threshold.
    pub violations: usize,
    pub unmatched_pub: usize,
    pub unmatched_sub: usize,
}

pub fn summarize(samples: &[DelaySample], threshold_ns: u64) -> DelayReport {
    let count = samples.len();
    let sum_ns: u128 = samples.iter().map(|s| u128::from(s.delay_ns)).sum();
    let (mean_ns, stddev_ns) = if count == 0 {
        (None, None)
    } else {
        let mean = sum_ns as f64 / count as f64;
        // exact integer second moment when it fits, else two-pass floats
        let exact = samples
            .iter()
            .try_fold(0u128, |acc, s| {
                acc.checked_add(u128::from(s.delay_ns).checked_mul(u128::from(s.delay_ns))?)
            })
            .and_then(|sq| {
                let n = count as u128;
                n.checked_mul(sq)?.checked_sub(sum_ns.checked_mul(sum_ns)?)
                    .map(|num| num as f64 / (n * n) as f64)
            });
        let var = exact.unwrap_or_else(|| {
            samples
                .iter()
                .map(|s| (s.delay_ns as f64 - mean).powi(2))
                .sum::<f64>()
                / count as f64
        });
        (Some(mean), Some(var.sqrt()))
    };
    DelayReport {
        count,
        sum_ns,
        mean_ns,
        min_ns: samples.iter().map(|s| s.delay_ns).min(),
        max_ns: samples.iter().map(|s| s.delay_ns).max(),
        stddev_ns,
        threshold_ns,
        violations: samples.iter().filter(|s| s.delay_ns > threshold_ns).count(),
        unmatched_pub: 0,
        unmatched_sub: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadAccounting {
    /// Frame bytes plus preamble and inter-frame gap.
    #[default]
    WithOverhead,
    FrameOnly,
}

/// Fraction of `bandwidth_bps` used by records with timestamps in
/// `[start_ns, start_ns + window_ns)`. Uses each record's wire length.
pub fn compute_load(
    records: &[CaptureRecord],
    bandwidth_bps: u64,
    start_ns: u64,
    window_ns: u64,
    accounting: LoadAccounting,
) -> Result<f64, AnalyzerError> {
    if window_ns == 0 || bandwidth_bps == 0 {
        return Err(AnalyzerError::Domain(
            "load needs a positive window and bandwidth".into(),
        ));
    }
    let end = start_ns.saturating_add(window_ns);
    let overhead = match accounting {
        LoadAccounting::WithOverhead => IFG_PREAMBLE_BYTES,
        LoadAccounting::FrameOnly => 0,
    };
    let bits: u128 = records
        .iter()
        .filter(|r| r.timestamp_ns >= start_ns && r.timestamp_ns < end)
        .map(|r| u128::from((u64::from(r.orig_len) + overhead) * 8))
        .sum();
    Ok(bits as f64 * 1e9 / (bandwidth_bps as f64 * window_ns as f64))
}
