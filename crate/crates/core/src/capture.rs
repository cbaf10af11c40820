use std::sync::Arc;

/// One captured frame.
///
/// `frame` may hold more bytes than were kept: only the first `incl_len`
/// bytes belong to the capture (snap length). `orig_len` is the size on the
/// wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub timestamp_ns: u64,
    frame: Arc<[u8]>,
    incl_len: u32,
    pub orig_len: u32,
}

impl CaptureRecord {
    pub fn new(timestamp_ns: u64, data: impl Into<Arc<[u8]>>) -> Self {
        let frame: Arc<[u8]> = data.into();
        let len = frame.len() as u32;
        CaptureRecord {
            timestamp_ns,
            frame,
            incl_len: len,
            orig_len: len,
        }
    }

    /// Shares `frame` and keeps at most `snaplen` bytes of it.
    pub fn truncated(timestamp_ns: u64, frame: Arc<[u8]>, snaplen: u32) -> Self {
        let orig_len = frame.len() as u32;
        CaptureRecord {
            timestamp_ns,
            frame,
            incl_len: orig_len.min(snaplen),
            orig_len,
        }
    }

    /// Record whose wire length exceeds the stored bytes.
    pub fn with_orig_len(timestamp_ns: u64, data: impl Into<Arc<[u8]>>, orig_len: u32) -> Self {
        let mut r = CaptureRecord::new(timestamp_ns, data);
        r.orig_len = orig_len;
        r
    }

    pub fn data(&self) -> &[u8] {
        &self.frame[..self.incl_len as usize]
    }

    pub fn incl_len(&self) -> u32 {
        self.incl_len
    }
}
