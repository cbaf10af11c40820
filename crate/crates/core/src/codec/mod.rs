//! Wire formats: Ethernet II / 802.1Q, GOOSE and Sampled Values.

mod ber;
pub mod ethernet;
pub mod goose;
pub mod sv;

use thiserror::Error;

pub use ethernet::{
    classify, decode_frame, decode_header, encode_frame, wire_size, EthernetFrame, FrameClass,
    FrameHeader, FrameLimits, MacAddress, VlanTag, DEFAULT_MAX_FRAME_SIZE, ETHERTYPE_GOOSE,
    ETHERTYPE_IPV4, ETHERTYPE_SV, ETHERTYPE_VLAN, STRICT_MAX_FRAME_SIZE,
};
pub use goose::{
    decode_goose, encode_goose, goose_key, BitString, DataValue, GoosePdu, GooseSessionHeader, UtcTime,
    MAX_STRING_LEN,
};
pub use sv::{decode_sv, encode_sv, SvApdu, SvAsdu, SvSample, SAMPLES_PER_ASDU};

/// Errors raised while encoding or decoding frames and PDUs.
///
/// Decode errors carry the byte offset (relative to the buffer handed to the
/// decoder) where the problem was found.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated input at offset {offset}: need {needed} bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("frame of {size} bytes exceeds maximum {max}")]
    FrameTooLarge { size: usize, max: usize },
    #[error("invalid VLAN {field}: {value}")]
    InvalidVlan { field: &'static str, value: u32 },
    #[error("invalid MAC address {0:?}")]
    InvalidMac(String),
    #[error("field {field} is {len} bytes, limit is {max}")]
    FieldSize {
        field: &'static str,
        len: usize,
        max: usize,
    },
    #[error("field {field} must not be empty")]
    EmptyField { field: &'static str },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{field}: declared length {declared} but content is {actual} bytes")]
    LengthMismatch {
        field: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("expected tag 0x{expected:02x} for {field} at offset {offset}, found 0x{found:02x}")]
    UnexpectedTag {
        field: &'static str,
        expected: u8,
        found: u8,
        offset: usize,
    },
    #[error("unknown tag 0x{tag:02x} in {field} at offset {offset}")]
    UnknownTag {
        field: &'static str,
        tag: u8,
        offset: usize,
    },
    #[error("non-minimal or unsupported length encoding at offset {offset}")]
    BadLength { offset: usize },
    #[error("invalid {field} at offset {offset}: {reason}")]
    InvalidValue {
        field: &'static str,
        offset: usize,
        reason: String,
    },
}
