//! GOOSE publisher retransmission and subscriber freshness state machines.
//!
//! Both machines are plain values: every transition takes the current state
//! and an input and produces outputs, with time supplied by the caller.

mod publisher;
mod subscriber;

use thiserror::Error;

pub use publisher::{
    Emission, GooseIdentity, IntervalLaw, PublisherState, Ratio, RetransmissionProfile,
    TatlPolicy,
};
pub use subscriber::{classify, Freshness, ReceiveVerdict, SubscriberState, SubscriptionEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid retransmission profile: {0}")]
    Profile(String),
    #[error("dataset arity mismatch: expected {expected} values, got {got}")]
    DatasetArity { expected: usize, got: usize },
    #[error("retransmission requested before the first event")]
    NothingPublished,
}
