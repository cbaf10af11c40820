//! Sampled Values APDU (9-2 "light edition" shape).
//!
//! ```text
//! APPID(2) Length(2) Reserved1(2) Reserved2(2)
//! 0x60 savPdu
//!   0x80 noASDU
//!   0xA2 seqASDU
//!     0x30 ASDU
//!       0x80 svID  [0x81 datSet]  0x82 smpCnt(2)  0x83 confRev(4)
//!       0x85 smpSynch(1)  0x87 seqData(64: 8 x (value i32, quality u32))
//! ```
//!
//! smpCnt, confRev and smpSynch use fixed widths so the frame size depends
//! only on the ASDU count and the string lengths.

use super::ber::{self, Reader, Tlv};
use super::ethernet::{EthernetFrame, MacAddress, VlanTag, ETHERTYPE_SV};
use super::goose::{MAX_STRING_LEN, SESSION_HEADER_LEN};
use super::CodecError;

/// Four currents then four voltages (phases A, B, C and neutral).
pub const SAMPLES_PER_ASDU: usize = 8;
const SEQ_DATA_LEN: usize = SAMPLES_PER_ASDU * 8;

const TAG_SAV_PDU: u8 = 0x60;
const TAG_NO_ASDU: u8 = 0x80;
const TAG_SEQ_ASDU: u8 = 0xA2;
const TAG_ASDU: u8 = 0x30;
const TAG_SV_ID: u8 = 0x80;
const TAG_DAT_SET: u8 = 0x81;
const TAG_SMP_CNT: u8 = 0x82;
const TAG_CONF_REV: u8 = 0x83;
const TAG_SMP_SYNCH: u8 = 0x85;
const TAG_SEQ_DATA: u8 = 0x87;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SvSample {
    pub value: i32,
    pub quality: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvAsdu {
    pub sv_id: String,
    pub dat_set: Option<String>,
    /// Wraps at the stream's samples-per-second rate.
    pub smp_cnt: u16,
    pub conf_rev: u32,
    pub smp_synch: u8,
    pub samples: [SvSample; SAMPLES_PER_ASDU],
}

impl SvAsdu {
    fn content_size(&self) -> usize {
        ber::tlv_size(self.sv_id.len())
            + self.dat_set.as_ref().map_or(0, |d| ber::tlv_size(d.len()))
            + ber::tlv_size(2)
            + ber::tlv_size(4)
            + ber::tlv_size(1)
            + ber::tlv_size(SEQ_DATA_LEN)
    }

    fn validate(&self) -> Result<(), CodecError> {
        check_string("svID", &self.sv_id)?;
        if let Some(d) = &self.dat_set {
            check_string("datSet", d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvApdu {
    pub appid: u16,
    pub asdus: Vec<SvAsdu>,
}

impl SvApdu {
    fn seq_content_size(&self) -> usize {
        self.asdus
            .iter()
            .map(|a| ber::tlv_size(a.content_size()))
            .sum()
    }

    fn pdu_content_size(&self) -> usize {
        ber::tlv_size(ber::uint_size(self.asdus.len() as u32))
            + ber::tlv_size(self.seq_content_size())
    }

    /// Value of the session-header length field (header + savPdu).
    pub fn encoded_len(&self) -> usize {
        SESSION_HEADER_LEN + ber::tlv_size(self.pdu_content_size())
    }

    pub fn no_asdu(&self) -> usize {
        self.asdus.len()
    }
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
    if !s.bytes().all(|b| (0x20..=0x7E).contains(&b)) {
        return Err(CodecError::InvalidValue {
            field,
            offset: 0,
            reason: "not printable ASCII".into(),
        });
    }
    Ok(())
}

pub fn encode_sv(apdu: &SvApdu) -> Result<Vec<u8>, CodecError> {
    if apdu.asdus.is_empty() {
        return Err(CodecError::Invariant("noASDU must be at least 1".into()));
    }
    for a in &apdu.asdus {
        a.validate()?;
    }
    let total = apdu.encoded_len();
    let length = u16::try_from(total).map_err(|_| CodecError::FieldSize {
        field: "length",
        len: total,
        max: usize::from(u16::MAX),
    })?;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&apdu.appid.to_be_bytes());
    out.extend_from_slice(&length.to_be_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]);

    out.push(TAG_SAV_PDU);
    ber::write_length(&mut out, apdu.pdu_content_size());
    ber::write_tlv(
        &mut out,
        TAG_NO_ASDU,
        &ber::uint_content(apdu.asdus.len() as u32),
    );
    out.push(TAG_SEQ_ASDU);
    ber::write_length(&mut out, apdu.seq_content_size());
    for a in &apdu.asdus {
        out.push(TAG_ASDU);
        ber::write_length(&mut out, a.content_size());
        ber::write_tlv(&mut out, TAG_SV_ID, a.sv_id.as_bytes());
        if let Some(d) = &a.dat_set {
            ber::write_tlv(&mut out, TAG_DAT_SET, d.as_bytes());
        }
        ber::write_tlv(&mut out, TAG_SMP_CNT, &a.smp_cnt.to_be_bytes());
        ber::write_tlv(&mut out, TAG_CONF_REV, &a.conf_rev.to_be_bytes());
        ber::write_tlv(&mut out, TAG_SMP_SYNCH, &[a.smp_synch]);
        out.push(TAG_SEQ_DATA);
        ber::write_length(&mut out, SEQ_DATA_LEN);
        for s in &a.samples {
            out.extend_from_slice(&s.value.to_be_bytes());
            out.extend_from_slice(&s.quality.to_be_bytes());
        }
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

fn fixed<'a>(tlv: &Tlv<'a>, field: &'static str, len: usize) -> Result<&'a [u8], CodecError> {
    if tlv.content.len() != len {
        return Err(CodecError::InvalidValue {
            field,
            offset: tlv.content_offset,
            reason: format!("expected {len} octets, found {}", tlv.content.len()),
        });
    }
    Ok(tlv.content)
}

fn visible(tlv: &Tlv<'_>, field: &'static str) -> Result<String, CodecError> {
    match std::str::from_utf8(tlv.content) {
        Ok(s) if s.bytes().all(|b| (0x20..=0x7E).contains(&b)) => Ok(s.to_string()),
        _ => Err(CodecError::InvalidValue {
            field,
            offset: tlv.content_offset,
            reason: "not printable ASCII".into(),
        }),
    }
}

fn decode_asdu(tlv: &Tlv<'_>) -> Result<SvAsdu, CodecError> {
    let mut r = Reader::new(tlv.content, tlv.content_offset);
    let sv_id = visible(&r.expect(TAG_SV_ID, "svID")?, "svID")?;
    let dat_set = if r.peek_tag() == Some(TAG_DAT_SET) {
        Some(visible(&r.read()?, "datSet")?)
    } else {
        None
    };
    let c = fixed(&r.expect(TAG_SMP_CNT, "smpCnt")?, "smpCnt", 2)?;
    let smp_cnt = u16::from_be_bytes([c[0], c[1]]);
    let c = fixed(&r.expect(TAG_CONF_REV, "confRev")?, "confRev", 4)?;
    let conf_rev = u32::from_be_bytes([c[0], c[1], c[2], c[3]]);
    let smp_synch = fixed(&r.expect(TAG_SMP_SYNCH, "smpSynch")?, "smpSynch", 1)?[0];
    let data = fixed(&r.expect(TAG_SEQ_DATA, "seqData")?, "seqData", SEQ_DATA_LEN)?;
    if let Some(tag) = r.peek_tag() {
        return Err(CodecError::UnknownTag {
            field: "ASDU",
            tag,
            offset: r.position(),
        });
    }
    let mut samples = [SvSample::default(); SAMPLES_PER_ASDU];
    for (s, chunk) in samples.iter_mut().zip(data.chunks_exact(8)) {
        s.value = i32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        s.quality = u32::from_be_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
    }
    Ok(SvAsdu {
        sv_id,
        dat_set,
        smp_cnt,
        conf_rev,
        smp_synch,
        samples,
    })
}

pub fn decode_sv(bytes: &[u8]) -> Result<SvApdu, CodecError> {
    if bytes.len() < SESSION_HEADER_LEN {
        return Err(CodecError::Truncated {
            offset: 0,
            needed: SESSION_HEADER_LEN,
            available: bytes.len(),
        });
    }
    let appid = u16::from_be_bytes([bytes[0], bytes[1]]);
    let length = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
    let mut outer = Reader::new(&bytes[SESSION_HEADER_LEN..], SESSION_HEADER_LEN);
    let pdu = outer.expect(TAG_SAV_PDU, "savPdu")?;
    if length != outer.position() {
        return Err(CodecError::LengthMismatch {
            field: "length",
            declared: length,
            actual: outer.position(),
        });
    }
    let mut r = Reader::new(pdu.content, pdu.content_offset);
    let no_tlv = r.expect(TAG_NO_ASDU, "noASDU")?;
    let no_asdu = ber::decode_u32(&no_tlv, "noASDU")?;
    let seq = r.expect(TAG_SEQ_ASDU, "seqASDU")?;
    let mut sr = Reader::new(seq.content, seq.content_offset);
    let mut asdus = Vec::new();
    while !sr.is_empty() {
        asdus.push(decode_asdu(&sr.expect(TAG_ASDU, "ASDU")?)?);
    }
    if no_asdu == 0 || asdus.len() != no_asdu as usize {
        return Err(CodecError::InvalidValue {
            field: "noASDU",
            offset: no_tlv.content_offset,
            reason: format!("declares {no_asdu}, found {} ASDUs", asdus.len()),
        });
    }
    Ok(SvApdu { appid, asdus })
}

/// Wraps an encoded APDU into an Ethernet frame.
pub fn sv_frame(
    dst: MacAddress,
    src: MacAddress,
    vlan: Option<VlanTag>,
    apdu: &SvApdu,
) -> Result<EthernetFrame, CodecError> {
    Ok(EthernetFrame {
        dst,
        src,
        vlan,
        ethertype: ETHERTYPE_SV,
        payload: encode_sv(apdu)?,
    })
}

/// Picks a `datSet` name so that a single-ASDU frame carrying `asdu` is
/// exactly `target` bytes on the wire. Returns `None` when no padding is
/// needed and an error when the target is unreachable.
pub fn dat_set_padding(
    asdu: &SvAsdu,
    tagged: bool,
    target: usize,
) -> Result<Option<String>, CodecError> {
    let frame_size = |dat_set: Option<String>| {
        let mut a = asdu.clone();
        a.dat_set = dat_set;
        let apdu = SvApdu {
            appid: 0,
            asdus: vec![a],
        };
        14 + if tagged { 4 } else { 0 } + apdu.encoded_len()
    };
    if frame_size(None) == target {
        return Ok(None);
    }
    for len in 1..=MAX_STRING_LEN {
        let candidate = format!("{}/LLN0$MSVCB01{}", asdu.sv_id, "_".repeat(len));
        let candidate: String = candidate.chars().take(len).collect();
        if frame_size(Some(candidate.clone())) == target {
            return Ok(Some(candidate));
        }
    }
    Err(CodecError::Invariant(format!(
        "no datSet length gives a {target}-byte SV frame"
    )))
}
