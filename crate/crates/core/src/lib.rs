//! GOOSE and Sampled Values on a switched station bus: frame codec,
//! publisher/subscriber state machines, a deterministic discrete-event
//! network simulator and a capture-based end-to-end delay analyzer.

pub mod codec;
pub mod engine;
pub mod capture;
pub mod netsim;
pub mod analyzer;
pub mod scenario;
pub mod units;
