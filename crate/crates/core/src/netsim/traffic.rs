use std::f64::consts::TAU;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::codec::sv::{dat_set_padding, sv_frame};
use crate::codec::{
    encode_frame, encode_goose, BitString, DataValue, EthernetFrame, FrameLimits, GoosePdu,
    GooseSessionHeader, MacAddress, SvApdu, SvAsdu, SvSample, VlanTag, ETHERTYPE_GOOSE,
    ETHERTYPE_IPV4, MAX_STRING_LEN, SAMPLES_PER_ASDU,
};
use crate::engine::{GooseIdentity, RetransmissionProfile};

use super::topology::NodeId;
use super::SimError;

/// Smallest frame we generate (64 bytes minus the FCS).
pub const MIN_FRAME_BYTES: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    pub name: String,
    pub source: NodeId,
    /// Nothing is sent before this time.
    pub start_ns: u64,
    pub kind: TrafficKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficKind {
    Goose(GooseTraffic),
    Sv(SvTraffic),
    Background(BackgroundTraffic),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GooseTraffic {
    pub profile: RetransmissionProfile,
    pub identity: GooseIdentity,
    pub appid: u16,
    pub dst: MacAddress,
    pub vlan: Option<VlanTag>,
    /// State changes, in simulated ns. Each one bumps stNum.
    pub event_times_ns: Vec<u64>,
    pub dataset: Vec<DataValue>,
    /// When set, goID is padded so the first frame of the first event is
    /// exactly this many bytes.
    pub frame_bytes: Option<usize>,
}

impl GooseTraffic {
    /// Priority 4, VID 0, default retransmission profile, no events yet.
    pub fn new(ied: &str, go_id: &str) -> Self {
        GooseTraffic {
            profile: RetransmissionProfile::default(),
            identity: GooseIdentity {
                gocb_ref: format!("{ied}LD0/LLN0$GO${go_id}"),
                dat_set: format!("{ied}LD0/LLN0$DS{go_id}"),
                go_id: go_id.to_string(),
                conf_rev: 1,
                test: false,
                nds_com: false,
            },
            appid: 1,
            dst: MacAddress([0x01, 0x0c, 0xcd, 0x01, 0x00, 0x01]),
            vlan: Some(VlanTag::new(4, false, 0).expect("valid tag")),
            event_times_ns: Vec::new(),
            dataset: vec![
                DataValue::Boolean(false),
                DataValue::Boolean(false),
                DataValue::BitString(BitString::zeros(13)),
            ],
            frame_bytes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvTraffic {
    pub samples_per_cycle: u32,
    pub frequency_hz: u32,
    pub frame_bytes: usize,
    pub priority: u8,
    pub vid: u16,
    pub dst: MacAddress,
    pub appid: u16,
    pub sv_id: String,
    /// Frames held back and released together. 1 sends every sample as
    /// soon as it is taken.
    pub burst: u32,
}

impl SvTraffic {
    pub fn new(sv_id: &str, samples_per_cycle: u32, frequency_hz: u32) -> Self {
        SvTraffic {
            samples_per_cycle,
            frequency_hz,
            frame_bytes: 230,
            priority: 4,
            vid: 0,
            dst: MacAddress([0x01, 0x0c, 0xcd, 0x04, 0x00, 0x01]),
            appid: 0x4000,
            sv_id: sv_id.to_string(),
            burst: 1,
        }
    }

    pub fn frames_per_second(&self) -> u64 {
        u64::from(self.samples_per_cycle) * u64::from(self.frequency_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalLaw {
    Periodic,
    /// Exponential gaps drawn from the simulation seed.
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundTraffic {
    pub load_fraction: f64,
    pub frame_bytes: usize,
    pub priority: u8,
    /// Frames are tagged when either this or the priority is nonzero.
    pub vid: u16,
    pub dst: MacAddress,
    pub law: ArrivalLaw,
    /// Frames per arrival.
    pub burst: u32,
    /// Bandwidth the load fraction refers to. Defaults to the source link.
    pub reference_bps: Option<u64>,
}

impl BackgroundTraffic {
    pub fn new(load_fraction: f64, frame_bytes: usize, dst: MacAddress) -> Self {
        BackgroundTraffic {
            load_fraction,
            frame_bytes,
            priority: 0,
            vid: 0,
            dst,
            law: ArrivalLaw::Periodic,
            burst: 1,
            reference_bps: None,
        }
    }

    fn tag(&self) -> Option<VlanTag> {
        (self.priority != 0 || self.vid != 0)
            .then(|| VlanTag::new(self.priority, false, self.vid).expect("validated"))
    }

    /// Mean gap between arrivals (bursts) in ns.
    pub fn mean_gap_ns(&self, bandwidth_bps: u64) -> f64 {
        let bits = (self.frame_bytes * 8) as f64 * f64::from(self.burst);
        bits * 1e9 / (self.load_fraction * bandwidth_bps as f64)
    }

    pub(crate) fn validate(&self, errs: &mut Vec<String>, who: &str, limits: FrameLimits) {
        if !(0.0..1.0).contains(&self.load_fraction) {
            errs.push(format!(
                "traffic {who:?}: load fraction {} outside [0, 1)",
                self.load_fraction
            ));
        }
        check_frame_bytes(errs, who, self.frame_bytes, limits);
        check_tag(errs, who, self.priority, self.vid);
        if self.burst == 0 {
            errs.push(format!("traffic {who:?}: burst must be at least 1"));
        }
        if self.reference_bps == Some(0) {
            errs.push(format!("traffic {who:?}: reference bandwidth must be positive"));
        }
    }

    /// One frame's bytes; all frames of a source are identical.
    pub fn frame(&self, src: MacAddress) -> Arc<[u8]> {
        let header = 14 + if self.tag().is_some() { 4 } else { 0 };
        let frame = EthernetFrame {
            dst: self.dst,
            src,
            vlan: self.tag(),
            ethertype: ETHERTYPE_IPV4,
            payload: vec![0; self.frame_bytes.saturating_sub(header)],
        };
        encode_frame(&frame, FrameLimits::default())
            .expect("size validated")
            .into()
    }
}

fn check_frame_bytes(errs: &mut Vec<String>, who: &str, bytes: usize, limits: FrameLimits) {
    if bytes < MIN_FRAME_BYTES || bytes > limits.max_frame_size {
        errs.push(format!(
            "traffic {who:?}: frame size {bytes} outside [{MIN_FRAME_BYTES}, {}]",
            limits.max_frame_size
        ));
    }
}

fn check_tag(errs: &mut Vec<String>, who: &str, priority: u8, vid: u16) {
    if priority > 7 {
        errs.push(format!("traffic {who:?}: priority {priority} exceeds 7"));
    }
    if vid > 4094 {
        errs.push(format!("traffic {who:?}: VLAN id {vid} exceeds 4094"));
    }
}

/// Arrival times of bursts, in ns.
#[derive(Debug, Clone)]
pub(crate) struct Arrivals {
    start: u64,
    mean_gap: f64,
    law: ArrivalLaw,
    exp: Option<Exp<f64>>,
    rng: ChaCha8Rng,
    k: u64,
    acc: f64,
}

impl Arrivals {
    pub(crate) fn new(start: u64, mean_gap: f64, law: ArrivalLaw, rng: ChaCha8Rng) -> Self {
        let exp = match law {
            ArrivalLaw::Poisson => Some(Exp::new(1.0 / mean_gap).expect("positive rate")),
            ArrivalLaw::Periodic => None,
        };
        Arrivals {
            start,
            mean_gap,
            law,
            exp,
            rng,
            k: 0,
            acc: 0.0,
        }
    }

    pub(crate) fn next_time(&mut self) -> u64 {
        let offset = match self.law {
            ArrivalLaw::Periodic => self.k as f64 * self.mean_gap,
            ArrivalLaw::Poisson => {
                self.acc += self.exp.expect("poisson").sample(&mut self.rng);
                self.acc
            }
        };
        self.k += 1;
        self.start + offset.round() as u64
    }
}

/// RNG for traffic source `stream`; independent of every other source.
pub(crate) fn source_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Frame release times of a background source sending on a link of
/// `bandwidth_bps`, up to and including `until_ns`.
pub fn background_arrivals(
    spec: &BackgroundTraffic,
    bandwidth_bps: u64,
    seed: u64,
    until_ns: u64,
) -> Result<Vec<u64>, SimError> {
    let mut errs = Vec::new();
    spec.validate(&mut errs, "background", FrameLimits::default());
    if bandwidth_bps == 0 {
        errs.push("bandwidth must be positive".into());
    }
    if !errs.is_empty() {
        return Err(SimError::Validation(errs));
    }
    if spec.load_fraction == 0.0 {
        return Ok(Vec::new());
    }
    let reference = spec.reference_bps.unwrap_or(bandwidth_bps);
    let mut arrivals = Arrivals::new(0, spec.mean_gap_ns(reference), spec.law, source_rng(seed, 0));
    let mut out = Vec::new();
    loop {
        let t = arrivals.next_time();
        if t > until_ns {
            return Ok(out);
        }
        out.extend(std::iter::repeat_n(t, spec.burst as usize));
    }
}

/// Goose frame bytes for one emission.
pub(crate) fn goose_bytes(
    g: &GooseTraffic,
    src: MacAddress,
    pdu: &GoosePdu,
    limits: FrameLimits,
) -> Result<Vec<u8>, SimError> {
    let payload = encode_goose(&GooseSessionHeader::new(g.appid), pdu)?;
    let frame = EthernetFrame {
        dst: g.dst,
        src,
        vlan: g.vlan,
        ethertype: ETHERTYPE_GOOSE,
        payload,
    };
    Ok(encode_frame(&frame, limits)?)
}

/// Next dataset after a state change: the first boolean flips, or failing
/// that the first integer increments.
pub(crate) fn next_dataset(data: &[DataValue]) -> Vec<DataValue> {
    let mut out = data.to_vec();
    if let Some(b) = out.iter_mut().find_map(|v| match v {
        DataValue::Boolean(b) => Some(b),
        _ => None,
    }) {
        *b = !*b;
    } else if let Some(i) = out.iter_mut().find_map(|v| match v {
        DataValue::Integer(i) => Some(i),
        _ => None,
    }) {
        *i = i.wrapping_add(1);
    }
    out
}

/// Resolves `frame_bytes` padding and checks that the identity encodes.
pub(crate) fn prepare_goose(
    g: &GooseTraffic,
    src: MacAddress,
    limits: FrameLimits,
) -> Result<GooseIdentity, String> {
    let size = |identity: &GooseIdentity| -> Result<usize, SimError> {
        let mut p = crate::engine::PublisherState::new(
            g.profile.clone(),
            identity.clone(),
            g.dataset.clone(),
        );
        let e = p.publish_event(next_dataset(&g.dataset), 0)?;
        Ok(goose_bytes(g, src, &e.pdu, limits)?.len())
    };
    let base = size(&g.identity).map_err(|e| e.to_string())?;
    let Some(target) = g.frame_bytes else {
        return Ok(g.identity.clone());
    };
    if base == target {
        return Ok(g.identity.clone());
    }
    for extra in 1..=MAX_STRING_LEN.saturating_sub(g.identity.go_id.len()) {
        let mut id = g.identity.clone();
        id.go_id.push_str(&"_".repeat(extra));
        if size(&id).map_err(|e| e.to_string())? == target {
            return Ok(id);
        }
    }
    Err(format!("no goID padding gives a {target}-byte frame (unpadded {base})"))
}

/// Pre-encoded frames of an SV stream, one per smpCnt value.
#[derive(Debug, Clone)]
pub(crate) struct SvFrames {
    frames: Vec<Arc<[u8]>>,
}

impl SvFrames {
    pub(crate) fn build(sv: &SvTraffic, src: MacAddress, limits: FrameLimits) -> Result<Self, String> {
        let rate = sv.frames_per_second();
        if rate > u64::from(u16::MAX) + 1 {
            return Err(format!("{rate} samples/s does not fit a 16-bit smpCnt"));
        }
        let vlan = Some(VlanTag::new(sv.priority, false, sv.vid).map_err(|e| e.to_string())?);
        let spc = f64::from(sv.samples_per_cycle);
        let mut frames = Vec::with_capacity(rate as usize);
        let mut dat_set = None;
        for k in 0..rate {
            let angle = TAU * (k % u64::from(sv.samples_per_cycle)) as f64 / spc;
            let mut samples = [SvSample::default(); SAMPLES_PER_ASDU];
            for (i, s) in samples.iter_mut().enumerate() {
                let phase = TAU * (i % 4) as f64 / 3.0;
                let amplitude = if i % 4 == 3 {
                    0.0
                } else if i < 4 {
                    1_000.0
                } else {
                    100_000.0
                };
                s.value = (amplitude * (angle - phase).sin()).round() as i32;
            }
            let mut asdu = SvAsdu {
                sv_id: sv.sv_id.clone(),
                dat_set: None,
                smp_cnt: k as u16,
                conf_rev: 1,
                smp_synch: 2,
                samples,
            };
            if k == 0 {
                dat_set = dat_set_padding(&asdu, true, sv.frame_bytes).map_err(|e| e.to_string())?;
            }
            asdu.dat_set = dat_set.clone();
            let apdu = SvApdu {
                appid: sv.appid,
                asdus: vec![asdu],
            };
            let frame = sv_frame(sv.dst, src, vlan, &apdu).map_err(|e| e.to_string())?;
            frames.push(encode_frame(&frame, limits).map_err(|e| e.to_string())?.into());
        }
        Ok(SvFrames { frames })
    }

    pub(crate) fn get(&self, sample: u64) -> Arc<[u8]> {
        self.frames[(sample % self.frames.len() as u64) as usize].clone()
    }
}

pub(crate) fn validate_sv(sv: &SvTraffic, errs: &mut Vec<String>, who: &str, limits: FrameLimits) {
    if sv.samples_per_cycle == 0 || sv.frequency_hz == 0 {
        errs.push(format!("traffic {who:?}: samples per cycle and frequency must be positive"));
    }
    check_frame_bytes(errs, who, sv.frame_bytes, limits);
    check_tag(errs, who, sv.priority, sv.vid);
    if sv.burst == 0 {
        errs.push(format!("traffic {who:?}: burst must be at least 1"));
    }
}
