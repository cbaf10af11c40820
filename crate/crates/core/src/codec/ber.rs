//! The small subset of BER used by GOOSE and SV: single-octet tags,
//! definite lengths up to two octets, minimal encodings.

use super::CodecError;

/// Number of octets used by the length field for `len`.
pub(crate) fn length_size(len: usize) -> usize {
    match len {
        0..=0x7F => 1,
        0x80..=0xFF => 2,
        _ => 3,
    }
}

/// Total TLV size for content of `len` bytes.
pub(crate) fn tlv_size(len: usize) -> usize {
    1 + length_size(len) + len
}

pub(crate) fn write_length(out: &mut Vec<u8>, len: usize) {
    debug_assert!(len <= 0xFFFF);
    match len {
        0..=0x7F => out.push(len as u8),
        0x80..=0xFF => out.extend_from_slice(&[0x81, len as u8]),
        _ => out.extend_from_slice(&[0x82, (len >> 8) as u8, len as u8]),
    }
}

pub(crate) fn write_tlv(out: &mut Vec<u8>, tag: u8, content: &[u8]) {
    out.push(tag);
    write_length(out, content.len());
    out.extend_from_slice(content);
}

/// Minimal two's-complement content octets for a signed value.
pub(crate) fn int_content(value: i64) -> Vec<u8> {
    let bytes = value.to_be_bytes();
    let mut start = 0;
    while start < 7 {
        let b = bytes[start];
        let next_high = bytes[start + 1] & 0x80;
        if (b == 0x00 && next_high == 0) || (b == 0xFF && next_high != 0) {
            start += 1;
        } else {
            break;
        }
    }
    bytes[start..].to_vec()
}

pub(crate) fn uint_content(value: u32) -> Vec<u8> {
    int_content(i64::from(value))
}

pub(crate) fn uint_size(value: u32) -> usize {
    int_content(i64::from(value)).len()
}

pub(crate) fn int_size(value: i64) -> usize {
    int_content(value).len()
}

/// One decoded TLV: tag, content and the absolute offset of the tag octet.
pub(crate) struct Tlv<'a> {
    pub tag: u8,
    pub content: &'a [u8],
    pub offset: usize,
    /// Absolute offset of the first content octet.
    pub content_offset: usize,
}

/// Sequential TLV reader over a slice. `base` is the absolute offset of
/// `buf[0]`, so errors report positions within the caller's buffer.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], base: usize) -> Self {
        Reader { buf, pos: 0, base }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn position(&self) -> usize {
        self.base + self.pos
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    pub fn read(&mut self) -> Result<Tlv<'a>, CodecError> {
        let start = self.pos;
        let abs = self.base + start;
        let tag = *self.buf.get(start).ok_or(CodecError::Truncated {
            offset: abs,
            needed: 2,
            available: 0,
        })?;
        if tag & 0x1F == 0x1F {
            return Err(CodecError::UnknownTag {
                field: "tag",
                tag,
                offset: abs,
            });
        }
        let mut p = start + 1;
        let first = *self.buf.get(p).ok_or(CodecError::Truncated {
            offset: self.base + p,
            needed: 1,
            available: 0,
        })?;
        p += 1;
        let len = match first {
            0x00..=0x7F => usize::from(first),
            0x81 => {
                let b = *self.buf.get(p).ok_or(CodecError::Truncated {
                    offset: self.base + p,
                    needed: 1,
                    available: 0,
                })?;
                p += 1;
                if b < 0x80 {
                    return Err(CodecError::BadLength {
                        offset: self.base + p - 2,
                    });
                }
                usize::from(b)
            }
            0x82 => {
                if self.buf.len() < p + 2 {
                    return Err(CodecError::Truncated {
                        offset: self.base + p,
                        needed: 2,
                        available: self.buf.len() - p,
                    });
                }
                let v = usize::from(u16::from_be_bytes([self.buf[p], self.buf[p + 1]]));
                p += 2;
                if v < 0x100 {
                    return Err(CodecError::BadLength {
                        offset: self.base + p - 3,
                    });
                }
                v
            }
            _ => {
                return Err(CodecError::BadLength {
                    offset: self.base + p - 1,
                })
            }
        };
        let available = self.buf.len() - p;
        if available < len {
            return Err(CodecError::Truncated {
                offset: self.base + p,
                needed: len,
                available,
            });
        }
        self.pos = p + len;
        Ok(Tlv {
            tag,
            content: &self.buf[p..p + len],
            offset: abs,
            content_offset: self.base + p,
        })
    }

    /// Reads a TLV and requires `tag`.
    pub fn expect(&mut self, tag: u8, field: &'static str) -> Result<Tlv<'a>, CodecError> {
        let offset = self.position();
        match self.peek_tag() {
            None => Err(CodecError::Truncated {
                offset,
                needed: 2,
                available: 0,
            }),
            Some(found) if found != tag => Err(CodecError::UnexpectedTag {
                field,
                expected: tag,
                found,
                offset,
            }),
            Some(_) => self.read(),
        }
    }
}

pub(crate) fn decode_int(tlv: &Tlv<'_>, field: &'static str) -> Result<i64, CodecError> {
    let c = tlv.content;
    if c.is_empty() || c.len() > 8 {
        return Err(CodecError::InvalidValue {
            field,
            offset: tlv.content_offset,
            reason: format!("integer of {} octets", c.len()),
        });
    }
    let mut v: i64 = if c[0] & 0x80 != 0 { -1 } else { 0 };
    for &b in c {
        v = (v << 8) | i64::from(b);
    }
    Ok(v)
}

pub(crate) fn decode_u32(tlv: &Tlv<'_>, field: &'static str) -> Result<u32, CodecError> {
    let v = decode_int(tlv, field)?;
    u32::try_from(v).map_err(|_| CodecError::InvalidValue {
        field,
        offset: tlv.content_offset,
        reason: format!("{v} out of unsigned 32-bit range"),
    })
}

pub(crate) fn decode_bool(tlv: &Tlv<'_>, field: &'static str) -> Result<bool, CodecError> {
    match tlv.content {
        [b] => Ok(*b != 0),
        c => Err(CodecError::InvalidValue {
            field,
            offset: tlv.content_offset,
            reason: format!("boolean of {} octets", c.len()),
        }),
    }
}
