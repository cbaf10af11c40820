//! Scenario files: a sectioned `key = value` text format describing a
//! topology, its traffic and the analysis to run, plus the runner that
//! turns one into captures, a delay report and a manifest.
//!
//! ```text
//! [scenario]
//! name = example
//! duration = 10s
//! seed = 7
//!
//! [switch sw]
//! processing_latency = 5us
//!
//! [ied pub]
//! mac = 02:00:00:00:00:01
//!
//! [link pub-sw]
//! a = pub
//! b = sw
//!
//! [tap tap-a]
//! link = pub-sw
//!
//! [goose gcb]
//! source = pub
//! event_period = 1s
//!
//! [analysis]
//! publisher = pub
//! pub_capture = tap-a
//! sub_capture = tap-b
//! ```

mod parse;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::codec::{FrameLimits, MacAddress};
use crate::netsim::{LinkId, NodeId, Topology, TrafficSpec};

pub use parse::parse_scenario_str;
pub use run::{run_scenario, Headline, ManifestFile, RunError, RunManifest, RunOptions, RunOutcome};

pub const DEFAULT_DURATION_NS: u64 = 180_000_000_000;

/// Scenarios shipped with the tool, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("baseline_idle", include_str!("../../scenarios/baseline_idle.scn")),
    ("baseline_30pct", include_str!("../../scenarios/baseline_30pct.scn")),
    ("load_50pct", include_str!("../../scenarios/load_50pct.scn")),
    ("sv_burst", include_str!("../../scenarios/sv_burst.scn")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Which captures to pair and how to judge the result.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub publisher: MacAddress,
    pub pub_capture: String,
    pub sub_capture: String,
    pub threshold_ns: u64,
    pub window_ns: u64,
    /// Link and sending end whose utilisation is the headline load.
    pub load_link: Option<(LinkId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration_ns: u64,
    pub seed: u64,
    pub limits: FrameLimits,
    pub topology: Topology,
    pub traffic: Vec<TrafficSpec>,
    pub analysis: Option<AnalysisSpec>,
    pub output: Option<PathBuf>,
    /// Source text, hashed into the manifest.
    pub text: String,
}

/// One problem in a scenario file. Line 0 means the model as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub line: usize,
    pub section: String,
    pub field: Option<String>,
    pub message: String,
}

impl ScenarioError {
    pub fn new(line: usize, section: &str, field: Option<&str>, message: impl Into<String>) -> Self {
        ScenarioError {
            line,
            section: section.to_string(),
            field: field.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: ", self.line)?;
        }
        if !self.section.is_empty() {
            write!(f, "[{}] ", self.section)?;
        }
        if let Some(k) = &self.field {
            write!(f, "{k}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", render_errors(.0))]
    Invalid(Vec<ScenarioError>),
}

fn render_errors(errs: &[ScenarioError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Loads a bundled scenario by name, or a scenario file by path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, LoadError> {
    if let Some(text) = bundled(name_or_path) {
        return parse_scenario_str(text).map_err(LoadError::Invalid);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text).map_err(LoadError::Invalid)
}

#[cfg(test)]
mod tests;
