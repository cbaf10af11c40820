use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analyzer::{analyze, encode_pcap, render_report, write_csv, Analysis, PcapError, PcapFile};
use crate::netsim::{
    sv_bandwidth, SimConfig, SimError, Simulation, SimulationResult, TrafficKind,
    IFG_PREAMBLE_BYTES,
};
use crate::units::format_duration;

use super::Scenario;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("output directory {path} is not writable: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pcap(#[from] PcapError),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's output directory.
    pub out_dir: Option<PathBuf>,
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
    /// Skips writing files (the simulation and analysis still run).
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub matched: usize,
    pub mean_delay_us: Option<f64>,
    pub min_delay_us: Option<f64>,
    pub max_delay_us: Option<f64>,
    pub stddev_us: Option<f64>,
    pub violations: usize,
    pub threshold_us: f64,
    /// Utilisation of the load link including preamble and gap, or
    /// `None` without one.
    pub load: Option<f64>,
    pub sv_offered_mbps: f64,
    pub tap_drops: u64,
    pub span_drops: u64,
    pub queue_drops: u64,
    pub loss_drops: u64,
}

/// Everything needed to reproduce and check a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub duration_ns: u64,
    pub tool_version: String,
    pub files: Vec<ManifestFile>,
    pub headline: Headline,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub analysis: Option<Analysis>,
    pub result: SimulationResult,
    pub out_dir: PathBuf,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn ensure_writable(dir: &Path) -> Result<(), RunError> {
    let unwritable = |source| RunError::Unwritable {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)
}

/// Utilisation of one direction of a link over the whole run.
fn link_load(s: &Scenario, r: &SimulationResult) -> Option<f64> {
    let (lid, from) = s.analysis.as_ref()?.load_link?;
    let link = s.topology.link(lid);
    let to = link.other(from);
    let prefix = format!(
        "link.{}.{}>{}",
        link.name,
        s.topology.node(from).name,
        s.topology.node(to).name
    );
    let bits = r.counter(&format!("{prefix}.tx_bits"))
        + r.counter(&format!("{prefix}.tx_frames")) * IFG_PREAMBLE_BYTES * 8;
    Some(bits as f64 / (link.bandwidth_bps as f64 * s.duration_ns as f64 / 1e9))
}

fn sum_counters(r: &SimulationResult, prefix: &str, suffix: &str) -> u64 {
    r.counters
        .iter()
        .filter(|(k, _)| k.starts_with(prefix) && k.ends_with(suffix))
        .map(|(_, v)| v)
        .sum()
}

/// Simulates, analyses and writes the outputs. The output directory is
/// checked before any simulation work.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| s.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    if !opts.dry_run {
        ensure_writable(&out_dir)?;
    }
    let seed = opts.seed.unwrap_or(s.seed);
    let config = SimConfig {
        limits: s.limits,
        ..Default::default()
    };
    let mut sim = Simulation::build(s.topology.clone(), s.traffic.clone(), seed, config)?;
    sim.run(s.duration_ns);
    let result = sim.into_result();

    let analysis = s.analysis.as_ref().map(|a| {
        let empty = Vec::new();
        analyze(
            result.captures.get(&a.pub_capture).unwrap_or(&empty),
            result.captures.get(&a.sub_capture).unwrap_or(&empty),
            a.publisher,
            a.threshold_ns,
            a.window_ns,
        )
    });

    let mut sv_bps = 0u64;
    for t in &s.traffic {
        if let TrafficKind::Sv(sv) = &t.kind {
            sv_bps += sv_bandwidth(
                u64::from(sv.samples_per_cycle),
                u64::from(sv.frequency_hz),
                sv.frame_bytes as u64,
            )?;
        }
    }
    let threshold_ns = s
        .analysis
        .as_ref()
        .map_or(crate::analyzer::DEFAULT_THRESHOLD_NS, |a| a.threshold_ns);
    let report = analysis.as_ref().map(|a| &a.report);
    let us = |v: u64| v as f64 / 1e3;
    let headline = Headline {
        matched: report.map_or(0, |r| r.count),
        mean_delay_us: report.and_then(|r| r.mean_ns).map(|v| v / 1e3),
        min_delay_us: report.and_then(|r| r.min_ns).map(us),
        max_delay_us: report.and_then(|r| r.max_ns).map(us),
        stddev_us: report.and_then(|r| r.stddev_ns).map(|v| v / 1e3),
        violations: report.map_or(0, |r| r.violations),
        threshold_us: us(threshold_ns),
        load: link_load(s, &result),
        sv_offered_mbps: sv_bps as f64 / 1e6,
        tap_drops: sum_counters(&result, "tap.", ".drops"),
        span_drops: sum_counters(&result, "span.", ".drops"),
        queue_drops: sum_counters(&result, "link.", ".queue_drops"),
        loss_drops: sum_counters(&result, "link.", ".loss_drops"),
    };

    // file name -> contents, in a stable order
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for (id, records) in &result.captures {
        let mut pcap = PcapFile::new(records.clone());
        if let Some(snap) = s
            .topology
            .taps
            .iter()
            .map(|t| (&t.capture_id, t.snaplen))
            .chain(s.topology.spans.iter().map(|t| (&t.capture_id, t.snaplen)))
            .find(|(c, _)| *c == id)
            .map(|(_, n)| n)
        {
            pcap.snaplen = snap;
        }
        files.insert(format!("{id}.pcap"), encode_pcap(&pcap)?);
    }
    let mut report_text = format!(
        "scenario={}\nseed={seed}\nduration={}\n",
        s.name,
        format_duration(s.duration_ns)
    );
    if let Some(a) = &analysis {
        let mut csv = Vec::new();
        write_csv(&a.samples, &mut csv).expect("in-memory write");
        files.insert("delays.csv".into(), csv);
        report_text.push_str(&render_report(&a.report));
    }
    if let Some(l) = headline.load {
        report_text.push_str(&format!("load={l:.4}\n"));
    }
    report_text.push_str(&format!(
        "sv_offered_mbps={:.3}\ntap_drops={}\nspan_drops={}\nqueue_drops={}\nloss_drops={}\n",
        headline.sv_offered_mbps,
        headline.tap_drops,
        headline.span_drops,
        headline.queue_drops,
        headline.loss_drops
    ));
    files.insert("report.txt".into(), report_text.into_bytes());

    let manifest = RunManifest {
        scenario: s.name.clone(),
        scenario_sha256: sha256_hex(s.text.as_bytes()),
        seed,
        duration_ns: s.duration_ns,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        files: files
            .iter()
            .map(|(name, data)| ManifestFile {
                name: name.clone(),
                bytes: data.len() as u64,
                sha256: sha256_hex(data),
            })
            .collect(),
        headline,
    };
    if !opts.dry_run {
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        files.insert("manifest.json".into(), json);
        for (name, data) in &files {
            let path = out_dir.join(name);
            fs::write(&path, data).map_err(|source| RunError::Io { path, source })?;
        }
    }
    Ok(RunOutcome {
        manifest,
        analysis,
        result,
        out_dir,
    })
}
