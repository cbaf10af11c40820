//! GOOSE session header and BER-encoded `goosePdu`.
//!
//! Layout of the Ethernet payload:
//!
//! ```text
//! APPID(2) Length(2) Reserved1(2) Reserved2(2) | 0x61 L goosePdu
//! ```
//!
//! `Length` counts the 8 header octets plus the whole `goosePdu` TLV.
//! Fields inside `goosePdu` use context tags 0x80..0x8A in fixed order and
//! `allData` is the constructed tag 0xAB.

use super::ber::{self, Reader, Tlv};
use super::CodecError;

pub const SESSION_HEADER_LEN: usize = 8;
/// Longest visible string accepted in a PDU field.
pub const MAX_STRING_LEN: usize = 129;

const TAG_PDU: u8 = 0x61;
const TAG_GOCB_REF: u8 = 0x80;
const TAG_TATL: u8 = 0x81;
const TAG_DAT_SET: u8 = 0x82;
const TAG_GO_ID: u8 = 0x83;
const TAG_T: u8 = 0x84;
const TAG_ST_NUM: u8 = 0x85;
const TAG_SQ_NUM: u8 = 0x86;
const TAG_TEST: u8 = 0x87;
const TAG_CONF_REV: u8 = 0x88;
const TAG_NDS_COM: u8 = 0x89;
const TAG_NUM_ENTRIES: u8 = 0x8A;
const TAG_ALL_DATA: u8 = 0xAB;

const TAG_DATA_BOOLEAN: u8 = 0x83;
const TAG_DATA_BIT_STRING: u8 = 0x84;
const TAG_DATA_INTEGER: u8 = 0x85;
const TAG_DATA_VISIBLE_STRING: u8 = 0x8A;

const PDU_FIELD_TAGS: [u8; 12] = [
    TAG_GOCB_REF,
    TAG_TATL,
    TAG_DAT_SET,
    TAG_GO_ID,
    TAG_T,
    TAG_ST_NUM,
    TAG_SQ_NUM,
    TAG_TEST,
    TAG_CONF_REV,
    TAG_NDS_COM,
    TAG_NUM_ENTRIES,
    TAG_ALL_DATA,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GooseSessionHeader {
    pub appid: u16,
    pub length: u16,
    pub reserved1: u16,
    pub reserved2: u16,
}

impl GooseSessionHeader {
    pub fn new(appid: u16) -> Self {
        GooseSessionHeader {
            appid,
            length: 0,
            reserved1: 0,
            reserved2: 0,
        }
    }
}

/// IEC 61850 UtcTime: seconds since the Unix epoch, a 24-bit binary
/// fraction of a second and a quality octet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct UtcTime {
    pub seconds: u32,
    /// Only the low 24 bits are significant.
    pub fraction: u32,
    pub quality: u8,
}

impl UtcTime {
    const FRACTION_ONE: u64 = 1 << 24;

    /// Rounds `nanos` to the nearest representable fraction.
    pub fn from_unix_nanos(nanos: u64, quality: u8) -> Self {
        let mut seconds = nanos / 1_000_000_000;
        let sub = nanos % 1_000_000_000;
        let mut fraction = (sub * Self::FRACTION_ONE + 500_000_000) / 1_000_000_000;
        if fraction == Self::FRACTION_ONE {
            fraction = 0;
            seconds += 1;
        }
        UtcTime {
            seconds: seconds as u32,
            fraction: fraction as u32,
            quality,
        }
    }

    /// Nanoseconds within the second, truncated the way capture tools
    /// display them.
    pub fn subsec_nanos(&self) -> u32 {
        ((u64::from(self.fraction & 0x00FF_FFFF) * 1_000_000_000) >> 24) as u32
    }

    pub fn to_unix_nanos(&self) -> u64 {
        u64::from(self.seconds) * 1_000_000_000 + u64::from(self.subsec_nanos())
    }

    fn to_bytes(self) -> [u8; 8] {
        let s = self.seconds.to_be_bytes();
        let f = self.fraction.to_be_bytes();
        [s[0], s[1], s[2], s[3], f[1], f[2], f[3], self.quality]
    }

    fn from_bytes(b: &[u8; 8]) -> Self {
        UtcTime {
            seconds: u32::from_be_bytes([b[0], b[1], b[2], b[3]]),
            fraction: u32::from_be_bytes([0, b[4], b[5], b[6]]),
            quality: b[7],
        }
    }
}

/// Bit string with explicit length; trailing padding bits are zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    unused_bits: u8,
}

impl BitString {
    pub fn new(bit_len: usize, bytes: Vec<u8>) -> Result<Self, CodecError> {
        if bytes.len() != bit_len.div_ceil(8) {
            return Err(CodecError::Invariant(format!(
                "bit string of {bit_len} bits needs {} bytes, got {}",
                bit_len.div_ceil(8),
                bytes.len()
            )));
        }
        let unused_bits = (bytes.len() * 8 - bit_len) as u8;
        if let Some(last) = bytes.last() {
            let mask = (1u16 << unused_bits) as u8 - 1;
            if last & mask != 0 {
                return Err(CodecError::Invariant(
                    "bit string padding bits must be zero".into(),
                ));
            }
        }
        Ok(BitString { bytes, unused_bits })
    }

    pub fn zeros(bit_len: usize) -> Self {
        BitString::new(bit_len, vec![0; bit_len.div_ceil(8)]).expect("zero bits are valid")
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 - usize::from(self.unused_bits)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// The dataset member types this codec understands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DataValue {
    Boolean(bool),
    Integer(i64),
    BitString(BitString),
    VisibleString(String),
}

impl DataValue {
    fn encoded_size(&self) -> usize {
        match self {
            DataValue::Boolean(_) => 3,
            DataValue::Integer(v) => ber::tlv_size(ber::int_size(*v)),
            DataValue::BitString(b) => ber::tlv_size(1 + b.bytes.len()),
            DataValue::VisibleString(s) => ber::tlv_size(s.len()),
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            DataValue::Boolean(b) => ber::write_tlv(out, TAG_DATA_BOOLEAN, &[u8::from(*b)]),
            DataValue::Integer(v) => ber::write_tlv(out, TAG_DATA_INTEGER, &ber::int_content(*v)),
            DataValue::BitString(b) => {
                out.push(TAG_DATA_BIT_STRING);
                ber::write_length(out, 1 + b.bytes.len());
                out.push(b.unused_bits);
                out.extend_from_slice(&b.bytes);
            }
            DataValue::VisibleString(s) => {
                ber::write_tlv(out, TAG_DATA_VISIBLE_STRING, s.as_bytes())
            }
        }
    }

    fn decode(tlv: &Tlv<'_>) -> Result<Self, CodecError> {
        match tlv.tag {
            TAG_DATA_BOOLEAN => Ok(DataValue::Boolean(ber::decode_bool(tlv, "allData")?)),
            TAG_DATA_INTEGER => Ok(DataValue::Integer(ber::decode_int(tlv, "allData")?)),
            TAG_DATA_BIT_STRING => {
                let invalid = |reason: &str| CodecError::InvalidValue {
                    field: "allData",
                    offset: tlv.content_offset,
                    reason: reason.into(),
                };
                let (&unused, bytes) = tlv
                    .content
                    .split_first()
                    .ok_or_else(|| invalid("empty bit string"))?;
                if unused > 7 || (bytes.is_empty() && unused != 0) {
                    return Err(invalid("bad unused-bit count"));
                }
                let bit_len = bytes.len() * 8 - usize::from(unused);
                BitString::new(bit_len, bytes.to_vec())
                    .map(DataValue::BitString)
                    .map_err(|_| invalid("non-zero padding bits"))
            }
            TAG_DATA_VISIBLE_STRING => Ok(DataValue::VisibleString(decode_visible(
                tlv, "allData",
            )?)),
            tag => Err(CodecError::UnknownTag {
                field: "allData",
                tag,
                offset: tlv.offset,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoosePdu {
    pub gocb_ref: String,
    /// Time allowed to live, milliseconds.
    pub time_allowed_to_live: u32,
    pub dat_set: String,
    pub go_id: String,
    pub t: UtcTime,
    pub st_num: u32,
    pub sq_num: u32,
    pub test: bool,
    pub conf_rev: u32,
    pub nds_com: bool,
    pub num_dat_set_entries: u32,
    pub all_data: Vec<DataValue>,
}

impl GoosePdu {
    pub fn validate(&self) -> Result<(), CodecError> {
        check_string("gocbRef", &self.gocb_ref)?;
        check_string("datSet", &self.dat_set)?;
        check_string("goID", &self.go_id)?;
        if self.time_allowed_to_live == 0 {
            return Err(CodecError::Invariant(
                "timeAllowedtoLive must be positive".into(),
            ));
        }
        if self.num_dat_set_entries as usize != self.all_data.len() {
            return Err(CodecError::Invariant(format!(
                "numDatSetEntries is {} but allData has {} items",
                self.num_dat_set_entries,
                self.all_data.len()
            )));
        }
        for v in &self.all_data {
            match v {
                DataValue::VisibleString(s) if s.len() > MAX_STRING_LEN => {
                    return Err(CodecError::FieldSize {
                        field: "allData",
                        len: s.len(),
                        max: MAX_STRING_LEN,
                    })
                }
                DataValue::VisibleString(s) if !is_visible(s) => {
                    return Err(CodecError::Invariant(
                        "visible strings must be printable ASCII".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn all_data_content_size(&self) -> usize {
        self.all_data.iter().map(DataValue::encoded_size).sum()
    }

    fn content_size(&self) -> usize {
        ber::tlv_size(self.gocb_ref.len())
            + ber::tlv_size(ber::uint_size(self.time_allowed_to_live))
            + ber::tlv_size(self.dat_set.len())
            + ber::tlv_size(self.go_id.len())
            + ber::tlv_size(8)
            + ber::tlv_size(ber::uint_size(self.st_num))
            + ber::tlv_size(ber::uint_size(self.sq_num))
            + 3
            + ber::tlv_size(ber::uint_size(self.conf_rev))
            + 3
            + ber::tlv_size(ber::uint_size(self.num_dat_set_entries))
            + ber::tlv_size(self.all_data_content_size())
    }

    /// Size of the `goosePdu` TLV in bytes.
    pub fn encoded_len(&self) -> usize {
        ber::tlv_size(self.content_size())
    }
}

fn is_visible(s: &str) -> bool {
    s.bytes().all(|b| (0x20..=0x7E).contains(&b))
}

fn check_string(field: &'static str, s: &str) -> Result<(), CodecError> {
    if s.is_empty() {
        return Err(CodecError::EmptyField { field });
    }
    if s.len() > MAX_STRING_LEN {
        return Err(CodecError::FieldSize {
            field,
            len: s.len(),
            max: MAX_STRING_LEN,
        });
    }
    if !is_visible(s) {
        return Err(CodecError::InvalidValue {
            field,
            offset: 0,
            reason: "not printable ASCII".into(),
        });
    }
    Ok(())
}

/// Encodes session header plus PDU. The header's length field is
/// recomputed and the reserved fields are written as zero.
pub fn encode_goose(header: &GooseSessionHeader, pdu: &GoosePdu) -> Result<Vec<u8>, CodecError> {
    pdu.validate()?;
    let content_len = pdu.content_size();
    let total = SESSION_HEADER_LEN + ber::tlv_size(content_len);
    let length = u16::try_from(total).map_err(|_| CodecError::FieldSize {
        field: "length",
        len: total,
        max: usize::from(u16::MAX),
    })?;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&header.appid.to_be_bytes());
    out.extend_from_slice(&length.to_be_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]);

    out.push(TAG_PDU);
    ber::write_length(&mut out, content_len);
    ber::write_tlv(&mut out, TAG_GOCB_REF, pdu.gocb_ref.as_bytes());
    ber::write_tlv(&mut out, TAG_TATL, &ber::uint_content(pdu.time_allowed_to_live));
    ber::write_tlv(&mut out, TAG_DAT_SET, pdu.dat_set.as_bytes());
    ber::write_tlv(&mut out, TAG_GO_ID, pdu.go_id.as_bytes());
    ber::write_tlv(&mut out, TAG_T, &pdu.t.to_bytes());
    ber::write_tlv(&mut out, TAG_ST_NUM, &ber::uint_content(pdu.st_num));
    ber::write_tlv(&mut out, TAG_SQ_NUM, &ber::uint_content(pdu.sq_num));
    ber::write_tlv(&mut out, TAG_TEST, &[u8::from(pdu.test)]);
    ber::write_tlv(&mut out, TAG_CONF_REV, &ber::uint_content(pdu.conf_rev));
    ber::write_tlv(&mut out, TAG_NDS_COM, &[u8::from(pdu.nds_com)]);
    ber::write_tlv(
        &mut out,
        TAG_NUM_ENTRIES,
        &ber::uint_content(pdu.num_dat_set_entries),
    );
    out.push(TAG_ALL_DATA);
    ber::write_length(&mut out, pdu.all_data_content_size());
    for v in &pdu.all_data {
        v.encode(&mut out);
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

fn field<'a>(r: &mut Reader<'a>, tag: u8, name: &'static str) -> Result<Tlv<'a>, CodecError> {
    match r.peek_tag() {
        Some(found) if found != tag && !PDU_FIELD_TAGS.contains(&found) => {
            Err(CodecError::UnknownTag {
                field: name,
                tag: found,
                offset: r.position(),
            })
        }
        _ => r.expect(tag, name),
    }
}

fn decode_visible(tlv: &Tlv<'_>, field: &'static str) -> Result<String, CodecError> {
    if tlv.content.len() > MAX_STRING_LEN {
        return Err(CodecError::FieldSize {
            field,
            len: tlv.content.len(),
            max: MAX_STRING_LEN,
        });
    }
    match std::str::from_utf8(tlv.content) {
        Ok(s) if is_visible(s) => Ok(s.to_string()),
        _ => Err(CodecError::InvalidValue {
            field,
            offset: tlv.content_offset,
            reason: "not printable ASCII".into(),
        }),
    }
}

/// Decodes a GOOSE Ethernet payload. Bytes past the declared length (for
/// instance Ethernet padding) are ignored.
pub fn decode_goose(bytes: &[u8]) -> Result<(GooseSessionHeader, GoosePdu), CodecError> {
    if bytes.len() < SESSION_HEADER_LEN {
        return Err(CodecError::Truncated {
            offset: 0,
            needed: SESSION_HEADER_LEN,
            available: bytes.len(),
        });
    }
    let word = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
    let header = GooseSessionHeader {
        appid: word(0),
        length: word(2),
        reserved1: word(4),
        reserved2: word(6),
    };

    let mut outer = Reader::new(&bytes[SESSION_HEADER_LEN..], SESSION_HEADER_LEN);
    let pdu_tlv = outer.expect(TAG_PDU, "goosePdu")?;
    let actual = outer.position();
    if usize::from(header.length) != actual {
        return Err(CodecError::LengthMismatch {
            field: "length",
            declared: usize::from(header.length),
            actual,
        });
    }

    let mut r = Reader::new(pdu_tlv.content, pdu_tlv.content_offset);
    let gocb_ref = decode_visible(&field(&mut r, TAG_GOCB_REF, "gocbRef")?, "gocbRef")?;
    let time_allowed_to_live =
        ber::decode_u32(&field(&mut r, TAG_TATL, "timeAllowedtoLive")?, "timeAllowedtoLive")?;
    let dat_set = decode_visible(&field(&mut r, TAG_DAT_SET, "datSet")?, "datSet")?;
    let go_id = decode_visible(&field(&mut r, TAG_GO_ID, "goID")?, "goID")?;
    let t_tlv = field(&mut r, TAG_T, "t")?;
    let t_bytes: &[u8; 8] = t_tlv
        .content
        .try_into()
        .map_err(|_| CodecError::InvalidValue {
            field: "t",
            offset: t_tlv.content_offset,
            reason: format!("timestamp of {} octets", t_tlv.content.len()),
        })?;
    let t = UtcTime::from_bytes(t_bytes);
    let st_num = ber::decode_u32(&field(&mut r, TAG_ST_NUM, "stNum")?, "stNum")?;
    let sq_num = ber::decode_u32(&field(&mut r, TAG_SQ_NUM, "sqNum")?, "sqNum")?;
    let test = ber::decode_bool(&field(&mut r, TAG_TEST, "test")?, "test")?;
    let conf_rev = ber::decode_u32(&field(&mut r, TAG_CONF_REV, "confRev")?, "confRev")?;
    let nds_com = ber::decode_bool(&field(&mut r, TAG_NDS_COM, "ndsCom")?, "ndsCom")?;
    let num_tlv = field(&mut r, TAG_NUM_ENTRIES, "numDatSetEntries")?;
    let num_dat_set_entries = ber::decode_u32(&num_tlv, "numDatSetEntries")?;
    let data_tlv = field(&mut r, TAG_ALL_DATA, "allData")?;
    if let Some(tag) = r.peek_tag() {
        return Err(CodecError::UnknownTag {
            field: "goosePdu",
            tag,
            offset: r.position(),
        });
    }

    let mut data = Reader::new(data_tlv.content, data_tlv.content_offset);
    let mut all_data = Vec::new();
    while !data.is_empty() {
        let item = data.read()?;
        all_data.push(DataValue::decode(&item)?);
    }
    if all_data.len() != num_dat_set_entries as usize {
        return Err(CodecError::InvalidValue {
            field: "numDatSetEntries",
            offset: num_tlv.content_offset,
            reason: format!(
                "declares {num_dat_set_entries} entries, allData holds {}",
                all_data.len()
            ),
        });
    }

    Ok((
        header,
        GoosePdu {
            gocb_ref,
            time_allowed_to_live,
            dat_set,
            go_id,
            t,
            st_num,
            sq_num,
            test,
            conf_rev,
            nds_com,
            num_dat_set_entries,
            all_data,
        },
    ))
}

/// `(stNum, sqNum)` of a GOOSE payload.
pub fn goose_key(payload: &[u8]) -> Result<(u32, u32), CodecError> {
    decode_goose(payload).map(|(_, p)| (p.st_num, p.sq_num))
}
