//! Ethernet II framing with optional IEEE 802.1Q tag.
//!
//! ```text
//!  0      6      12        14     16        18
//!  +------+------+---------+------+---------+-------------
//!  | dst  | src  | 0x8100  | TCI  | type    | payload ...
//!  +------+------+---------+------+---------+-------------
//!                 \_ present only when tagged _/
//! TCI = PCP(3) | DEI(1) | VID(12)
//! ```
//!
//! The frame check sequence is not represented; sizes are "bytes on wire"
//! as reported by capture tools.

use std::fmt;
use std::str::FromStr;

use super::CodecError;

pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETHERTYPE_GOOSE: u16 = 0x88B8;
pub const ETHERTYPE_SV: u16 = 0x88BA;
pub const ETHERTYPE_IPV4: u16 = 0x0800;

pub const ETHERNET_HEADER_LEN: usize = 14;
pub const VLAN_TAG_LEN: usize = 4;

/// Largest tagged frame accepted by default.
pub const DEFAULT_MAX_FRAME_SIZE: usize = 1822;
/// IEEE 802.3 limit for a tagged frame without FCS slack.
pub const STRICT_MAX_FRAME_SIZE: usize = 1522;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MacAddress(pub [u8; 6]);

impl MacAddress {
    pub const fn new(octets: [u8; 6]) -> Self {
        MacAddress(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// Group addresses have the I/G bit (LSB of the first octet) set.
    pub fn is_multicast(&self) -> bool {
        self.0[0] & 0x01 == 0x01
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacAddress({self})")
    }
}

impl FromStr for MacAddress {
    type Err = CodecError;

    /// Accepts `aa:bb:cc:dd:ee:ff` or `aa-bb-cc-dd-ee-ff`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::InvalidMac(s.to_string());
        let parts: Vec<&str> = s.split([':', '-']).collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let mut octets = [0u8; 6];
        for (slot, part) in octets.iter_mut().zip(parts) {
            if part.len() != 2 {
                return Err(bad());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| bad())?;
        }
        Ok(MacAddress(octets))
    }
}

/// 802.1p priority and 802.1Q VLAN identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VlanTag {
    pcp: u8,
    dei: bool,
    vid: u16,
}

impl VlanTag {
    pub fn new(pcp: u8, dei: bool, vid: u16) -> Result<Self, CodecError> {
        if pcp > 7 {
            return Err(CodecError::InvalidVlan {
                field: "pcp",
                value: u32::from(pcp),
            });
        }
        if vid > 4095 {
            return Err(CodecError::InvalidVlan {
                field: "vid",
                value: u32::from(vid),
            });
        }
        Ok(VlanTag { pcp, dei, vid })
    }

    pub fn pcp(&self) -> u8 {
        self.pcp
    }

    pub fn dei(&self) -> bool {
        self.dei
    }

    pub fn vid(&self) -> u16 {
        self.vid
    }

    pub fn tci(&self) -> u16 {
        (u16::from(self.pcp) << 13) | (u16::from(self.dei) << 12) | self.vid
    }

    pub fn from_tci(tci: u16) -> Self {
        VlanTag {
            pcp: (tci >> 13) as u8,
            dei: tci & 0x1000 != 0,
            vid: tci & 0x0FFF,
        }
    }
}

/// Upper bound applied when encoding frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLimits {
    pub max_frame_size: usize,
}

impl FrameLimits {
    pub const fn strict() -> Self {
        FrameLimits {
            max_frame_size: STRICT_MAX_FRAME_SIZE,
        }
    }
}

impl Default for FrameLimits {
    fn default() -> Self {
        FrameLimits {
            max_frame_size: DEFAULT_MAX_FRAME_SIZE,
        }
    }
}

/// Coarse classification by Ethertype (after untagging).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    Goose,
    SampledValues,
    Other(u16),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EthernetFrame {
    pub dst: MacAddress,
    pub src: MacAddress,
    pub vlan: Option<VlanTag>,
    /// Inner Ethertype; never `0x8100` (the tag lives in `vlan`).
    pub ethertype: u16,
    pub payload: Vec<u8>,
}

impl EthernetFrame {
    pub fn wire_size(&self) -> usize {
        ETHERNET_HEADER_LEN + self.vlan.map_or(0, |_| VLAN_TAG_LEN) + self.payload.len()
    }

    pub fn class(&self) -> FrameClass {
        classify(self.ethertype)
    }

    pub fn is_goose(&self) -> bool {
        self.ethertype == ETHERTYPE_GOOSE
    }

    /// 802.1p priority; untagged frames map to class 0.
    pub fn priority(&self) -> u8 {
        self.vlan.map_or(0, |t| t.pcp())
    }
}

pub fn classify(ethertype: u16) -> FrameClass {
    match ethertype {
        ETHERTYPE_GOOSE => FrameClass::Goose,
        ETHERTYPE_SV => FrameClass::SampledValues,
        other => FrameClass::Other(other),
    }
}

pub fn wire_size(frame: &EthernetFrame) -> usize {
    frame.wire_size()
}

pub fn encode_frame(frame: &EthernetFrame, limits: FrameLimits) -> Result<Vec<u8>, CodecError> {
    if frame.ethertype == ETHERTYPE_VLAN {
        return Err(CodecError::InvalidValue {
            field: "ethertype",
            offset: 12,
            reason: "0x8100 is reserved for the VLAN tag".into(),
        });
    }
    let size = frame.wire_size();
    if size > limits.max_frame_size {
        return Err(CodecError::FrameTooLarge {
            size,
            max: limits.max_frame_size,
        });
    }
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&frame.dst.0);
    out.extend_from_slice(&frame.src.0);
    if let Some(tag) = frame.vlan {
        out.extend_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
        out.extend_from_slice(&tag.tci().to_be_bytes());
    }
    out.extend_from_slice(&frame.ethertype.to_be_bytes());
    out.extend_from_slice(&frame.payload);
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

/// Header fields of a frame, parsed without copying the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub dst: MacAddress,
    pub src: MacAddress,
    pub vlan: Option<VlanTag>,
    pub ethertype: u16,
    /// Offset of the first payload byte.
    pub payload_offset: usize,
}

pub fn decode_header(bytes: &[u8]) -> Result<FrameHeader, CodecError> {
    need(bytes, ETHERNET_HEADER_LEN, 0)?;
    let mut dst = [0u8; 6];
    let mut src = [0u8; 6];
    dst.copy_from_slice(&bytes[0..6]);
    src.copy_from_slice(&bytes[6..12]);
    let outer = u16::from_be_bytes([bytes[12], bytes[13]]);
    if outer == ETHERTYPE_VLAN {
        need(bytes, ETHERNET_HEADER_LEN + VLAN_TAG_LEN, 14)?;
        let tci = u16::from_be_bytes([bytes[14], bytes[15]]);
        let ethertype = u16::from_be_bytes([bytes[16], bytes[17]]);
        Ok(FrameHeader {
            dst: MacAddress(dst),
            src: MacAddress(src),
            vlan: Some(VlanTag::from_tci(tci)),
            ethertype,
            payload_offset: 18,
        })
    } else {
        Ok(FrameHeader {
            dst: MacAddress(dst),
            src: MacAddress(src),
            vlan: None,
            ethertype: outer,
            payload_offset: 14,
        })
    }
}

pub fn decode_frame(bytes: &[u8]) -> Result<EthernetFrame, CodecError> {
    let h = decode_header(bytes)?;
    Ok(EthernetFrame {
        dst: h.dst,
        src: h.src,
        vlan: h.vlan,
        ethertype: h.ethertype,
        payload: bytes[h.payload_offset..].to_vec(),
    })
}

fn need(bytes: &[u8], len: usize, offset: usize) -> Result<(), CodecError> {
    if bytes.len() < len {
        Err(CodecError::Truncated {
            offset,
            needed: len - offset,
            available: bytes.len().saturating_sub(offset),
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(vlan: Option<VlanTag>, payload_len: usize) -> EthernetFrame {
        EthernetFrame {
            dst: "01:0c:cd:01:00:00".parse().unwrap(),
            src: "00:21:c1:25:08:a2".parse().unwrap(),
            vlan,
            ethertype: ETHERTYPE_GOOSE,
            payload: vec![0xAA; payload_len],
        }
    }

    #[test]
    fn untagged_goose_payload_164_is_178_on_wire() {
        let f = frame(None, 164);
        assert_eq!(f.wire_size(), 178);
        assert_eq!(encode_frame(&f, FrameLimits::default()).unwrap().len(), 178);
    }

    #[test]
    fn tagged_empty_frame_is_18_bytes() {
        let f = frame(Some(VlanTag::new(4, false, 1).unwrap()), 0);
        let bytes = encode_frame(&f, FrameLimits::default()).unwrap();
        assert_eq!(bytes.len(), 18);
        assert_eq!(wire_size(&f), 18);
        assert_eq!(&bytes[12..16], &[0x81, 0x00, 0x80, 0x01]);
        assert_eq!(&bytes[16..18], &[0x88, 0xB8]);
    }

    #[test]
    fn ten_bytes_is_truncated() {
        match decode_frame(&[0u8; 10]) {
            Err(CodecError::Truncated { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tagged_header_truncated_reports_tag_offset() {
        let mut bytes = vec![0u8; 16];
        bytes[12] = 0x81;
        match decode_frame(&bytes) {
            Err(CodecError::Truncated { offset: 14, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ethertype_0x88b8_classifies_as_goose() {
        let mut bytes = vec![0u8; 20];
        bytes[12] = 0x88;
        bytes[13] = 0xB8;
        let f = decode_frame(&bytes).unwrap();
        assert_eq!(f.class(), FrameClass::Goose);
        assert_eq!(f.payload.len(), 6);
    }

    #[test]
    fn oversize_frames_are_rejected_per_limit() {
        let f = frame(Some(VlanTag::new(4, false, 1).unwrap()), 1600);
        assert_eq!(f.wire_size(), 1618);
        assert!(encode_frame(&f, FrameLimits::default()).is_ok());
        assert!(matches!(
            encode_frame(&f, FrameLimits::strict()),
            Err(CodecError::FrameTooLarge { size: 1618, max: 1522 })
        ));
        let too_big = frame(None, DEFAULT_MAX_FRAME_SIZE - 13);
        assert!(encode_frame(&too_big, FrameLimits::default()).is_err());
    }

    #[test]
    fn vlan_field_ranges() {
        assert!(VlanTag::new(8, false, 1).is_err());
        assert!(VlanTag::new(7, true, 4096).is_err());
        let t = VlanTag::new(7, true, 4095).unwrap();
        assert_eq!(VlanTag::from_tci(t.tci()), t);
    }

    #[test]
    fn mac_parsing_and_multicast_bit() {
        let m: MacAddress = "01-0C-CD-01-00-01".parse().unwrap();
        assert!(m.is_multicast());
        assert_eq!(m.to_string(), "01:0c:cd:01:00:01");
        let u: MacAddress = "00:21:c1:25:08:a2".parse().unwrap();
        assert!(!u.is_multicast());
        assert!("00:21:c1:25:08".parse::<MacAddress>().is_err());
        assert!("00:21:c1:25:08:zz".parse::<MacAddress>().is_err());
    }

    #[test]
    fn inner_vlan_ethertype_is_refused() {
        let mut f = frame(None, 4);
        f.ethertype = ETHERTYPE_VLAN;
        assert!(encode_frame(&f, FrameLimits::default()).is_err());
    }
}
