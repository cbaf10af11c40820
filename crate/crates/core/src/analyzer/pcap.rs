//! Classic libpcap files with Ethernet link type.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::capture::CaptureRecord;

pub const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
pub const MAGIC_NANOS: u32 = 0xA1B2_3C4D;
pub const LINKTYPE_ETHERNET: u32 = 1;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
/// No Ethernet frame we read or write can be longer than this.
pub const MAX_RECORD_LEN: u32 = 65_535;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsResolution {
    Micros,
    Nanos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcapFile {
    pub resolution: TsResolution,
    pub snaplen: u32,
    pub records: Vec<CaptureRecord>,
}

impl PcapFile {
    pub fn new(records: Vec<CaptureRecord>) -> Self {
        PcapFile {
            resolution: TsResolution::Nanos,
            snaplen: MAX_RECORD_LEN,
            records,
        }
    }
}

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic number 0x{0:08x}")]
    BadMagic(u32),
    #[error("truncated global header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("link type {0} is not Ethernet")]
    Linktype(u32),
    #[error("record {index}: truncated at byte {offset}")]
    TruncatedRecord { index: usize, offset: usize },
    #[error("record {index}: captured length {incl_len} exceeds the limit {snaplen}")]
    Snaplen {
        index: usize,
        incl_len: u32,
        snaplen: u32,
    },
    #[error("record {index}: captured length {incl_len} exceeds original length {orig_len}")]
    Lengths {
        index: usize,
        incl_len: u32,
        orig_len: u32,
    },
    #[error("record {index}: timestamp goes backwards")]
    Unsorted { index: usize },
    #[error("record {index}: timestamp not representable")]
    Timestamp { index: usize },
}

pub fn read_pcap(path: &Path) -> Result<PcapFile, PcapError> {
    let bytes = fs::read(path).map_err(|source| PcapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pcap(&bytes)
}

pub fn parse_pcap(bytes: &[u8]) -> Result<PcapFile, PcapError> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TruncatedHeader(bytes.len()));
    }
    let raw = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let (big_endian, resolution) = match (u32::from_le_bytes(raw), u32::from_be_bytes(raw)) {
        (MAGIC_MICROS, _) => (false, TsResolution::Micros),
        (MAGIC_NANOS, _) => (false, TsResolution::Nanos),
        (_, MAGIC_MICROS) => (true, TsResolution::Micros),
        (_, MAGIC_NANOS) => (true, TsResolution::Nanos),
        (le, _) => return Err(PcapError::BadMagic(le)),
    };
    let u32_at = |off: usize| {
        let b = [bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]];
        if big_endian {
            u32::from_be_bytes(b)
        } else {
            u32::from_le_bytes(b)
        }
    };
    let snaplen = u32_at(16);
    let linktype = u32_at(20);
    if linktype != LINKTYPE_ETHERNET {
        return Err(PcapError::Linktype(linktype));
    }
    // the header snap length is advisory: writers exist that record
    // longer frames than they declare, and libpcap accepts them
    let limit = MAX_RECORD_LEN;
    let frac_scale: u64 = match resolution {
        TsResolution::Micros => 1_000,
        TsResolution::Nanos => 1,
    };
    let mut records = Vec::new();
    let mut off = GLOBAL_HEADER_LEN;
    while off < bytes.len() {
        let index = records.len();
        if bytes.len() - off < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord { index, offset: off });
        }
        let ts_sec = u64::from(u32_at(off));
        let ts_frac = u64::from(u32_at(off + 4));
        let incl_len = u32_at(off + 8);
        let orig_len = u32_at(off + 12);
        if incl_len > limit {
            return Err(PcapError::Snaplen {
                index,
                incl_len,
                snaplen: limit,
            });
        }
        if incl_len > orig_len {
            return Err(PcapError::Lengths {
                index,
                incl_len,
                orig_len,
            });
        }
        let start = off + RECORD_HEADER_LEN;
        let end = start + incl_len as usize;
        if end > bytes.len() {
            return Err(PcapError::TruncatedRecord { index, offset: start });
        }
        let ts = ts_sec * 1_000_000_000 + ts_frac * frac_scale;
        records.push(CaptureRecord::with_orig_len(ts, &bytes[start..end], orig_len));
        off = end;
    }
    Ok(PcapFile {
        resolution,
        snaplen,
        records,
    })
}

/// Little-endian classic pcap. Records must be in timestamp order.
pub fn encode_pcap(file: &PcapFile) -> Result<Vec<u8>, PcapError> {
    let total: usize = file
        .records
        .iter()
        .map(|r| RECORD_HEADER_LEN + r.incl_len() as usize)
        .sum();
    let mut out = Vec::with_capacity(GLOBAL_HEADER_LEN + total);
    let magic = match file.resolution {
        TsResolution::Micros => MAGIC_MICROS,
        TsResolution::Nanos => MAGIC_NANOS,
    };
    out.extend_from_slice(&magic.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&file.snaplen.to_le_bytes());
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
    let mut last = 0;
    for (index, r) in file.records.iter().enumerate() {
        if r.timestamp_ns < last {
            return Err(PcapError::Unsorted { index });
        }
        last = r.timestamp_ns;
        if r.incl_len() > file.snaplen.min(MAX_RECORD_LEN) {
            return Err(PcapError::Snaplen {
                index,
                incl_len: r.incl_len(),
                snaplen: file.snaplen,
            });
        }
        let sec = u32::try_from(r.timestamp_ns / 1_000_000_000)
            .map_err(|_| PcapError::Timestamp { index })?;
        let sub = r.timestamp_ns % 1_000_000_000;
        let frac = match file.resolution {
            TsResolution::Micros => sub / 1_000,
            TsResolution::Nanos => sub,
        } as u32;
        out.extend_from_slice(&sec.to_le_bytes());
        out.extend_from_slice(&frac.to_le_bytes());
        out.extend_from_slice(&r.incl_len().to_le_bytes());
        out.extend_from_slice(&r.orig_len.to_le_bytes());
        out.extend_from_slice(r.data());
    }
    Ok(out)
}

pub fn write_pcap(path: &Path, file: &PcapFile) -> Result<(), PcapError> {
    let bytes = encode_pcap(file)?;
    fs::write(path, bytes).map_err(|source| PcapError::Io {
        path: path.display().to_string(),
        source,
    })
}
