//! Discrete-event simulation of a switched 100 Mb/s station bus.
//!
//! Time is an integer count of nanoseconds. Switches are store-and-forward
//! with eight strict-priority egress queues per port; a frame's capture
//! timestamp is the moment its last bit passes the capture point.

mod sim;
mod topology;
mod traffic;

use thiserror::Error;

use crate::codec::CodecError;
use crate::engine::EngineError;

pub use sim::{
    simulate, DropCause, FrameLedger, LedgerEntry, SimConfig, Simulation, SimulationResult,
    DEFAULT_EPOCH_UNIX_NS, IFG_PREAMBLE_BYTES,
};
pub use topology::{
    Link, LinkId, Node, NodeId, NodeKind, Span, SwitchConfig, Tap, Topology,
    DEFAULT_BANDWIDTH_BPS, DEFAULT_SNAPLEN, DEFAULT_SPAN_BUFFER,
};
pub use traffic::{
    background_arrivals, ArrivalLaw, BackgroundTraffic, GooseTraffic, SvTraffic, TrafficKind,
    TrafficSpec, MIN_FRAME_BYTES,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Offered bit rate of a sampled-value stream sending one frame per sample.
pub fn sv_bandwidth(samples_per_cycle: u64, frequency_hz: u64, frame_bytes: u64) -> Result<u64, SimError> {
    if samples_per_cycle == 0 || frequency_hz == 0 || frame_bytes == 0 {
        return Err(SimError::Domain(format!(
            "sv_bandwidth needs positive arguments, got ({samples_per_cycle}, {frequency_hz}, {frame_bytes})"
        )));
    }
    samples_per_cycle
        .checked_mul(frequency_hz)
        .and_then(|r| r.checked_mul(frame_bytes))
        .and_then(|r| r.checked_mul(8))
        .ok_or_else(|| SimError::Domain("sv_bandwidth overflows".into()))
}

/// Frames per second of a sampled-value stream.
pub fn sv_frame_rate(samples_per_cycle: u64, frequency_hz: u64) -> Result<u64, SimError> {
    sv_bandwidth(samples_per_cycle, frequency_hz, 1).map(|b| b / 8)
}

#[cfg(test)]
mod tests;
