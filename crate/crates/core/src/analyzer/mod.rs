//! Two-point capture analysis: filter GOOSE by source, pair publisher and
//! subscriber observations of the same (source, stNum, sqNum) and report
//! end-to-end delay statistics.

mod delay;
pub mod pcap;

use std::io::{self, Write};

use thiserror::Error;

use crate::capture::CaptureRecord;
use crate::codec::MacAddress;
use crate::units::format_duration;

pub use delay::{
    compute_load, ete_delay, filter_goose, match_key, match_pairs, summarize, DelayReport,
    DelaySample, Filtered, LoadAccounting, MatchKey, MatchOutcome, DEFAULT_THRESHOLD_NS,
    DEFAULT_WINDOW_NS,
};
pub use pcap::{encode_pcap, parse_pcap, read_pcap, write_pcap, PcapError, PcapFile, TsResolution};

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("subscriber timestamp {t_des_ns} ns precedes publisher timestamp {t_tr_ns} ns")]
    Ordering { t_tr_ns: u64, t_des_ns: u64 },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Pcap(#[from] PcapError),
}

/// Everything the pipeline produces for one publisher.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub samples: Vec<DelaySample>,
    pub report: DelayReport,
    pub pub_goose_frames: usize,
    pub sub_goose_frames: usize,
    pub undecodable: usize,
}

/// filter, match, summarize.
pub fn analyze(
    publisher: &[CaptureRecord],
    subscriber: &[CaptureRecord],
    src: MacAddress,
    threshold_ns: u64,
    window_ns: u64,
) -> Analysis {
    let p = filter_goose(publisher, src);
    let s = filter_goose(subscriber, src);
    let m = match_pairs(&p.records, &s.records, window_ns);
    let mut report = summarize(&m.samples, threshold_ns);
    report.unmatched_pub = m.unmatched_pub;
    report.unmatched_sub = m.unmatched_sub;
    Analysis {
        samples: m.samples,
        report,
        pub_goose_frames: p.records.len(),
        sub_goose_frames: s.records.len(),
        undecodable: p.undecodable + s.undecodable + m.undecodable,
    }
}

pub const CSV_HEADER: &str = "src_mac,st_num,sq_num,t_pub_ns,t_sub_ns,delay_ns";

pub fn write_csv<W: Write>(samples: &[DelaySample], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.key.src, s.key.st_num, s.key.sq_num, s.t_pub_ns, s.t_sub_ns, s.delay_ns
        )?;
    }
    Ok(())
}

fn us(ns: f64) -> String {
    format!("{:.3}", ns / 1e3)
}

/// Flat `key=value` lines. Undefined statistics print as `undefined`.
pub fn render_report(r: &DelayReport) -> String {
    let undefined = || "undefined".to_string();
    let mut lines = vec![format!("count={}", r.count)];
    if r.count == 0 {
        lines.push("status=no matched frames".into());
    }
    lines.push(format!("mean_us={}", r.mean_ns.map_or_else(undefined, us)));
    lines.push(format!(
        "min_us={}",
        r.min_ns.map_or_else(undefined, |v| us(v as f64))
    ));
    lines.push(format!(
        "max_us={}",
        r.max_ns.map_or_else(undefined, |v| us(v as f64))
    ));
    lines.push(format!("stddev_us={}", r.stddev_ns.map_or_else(undefined, us)));
    lines.push(format!(
        "violations(>{})={}",
        format_duration(r.threshold_ns),
        r.violations
    ));
    lines.push(format!("unmatched_pub={}", r.unmatched_pub));
    lines.push(format!("unmatched_sub={}", r.unmatched_sub));
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
