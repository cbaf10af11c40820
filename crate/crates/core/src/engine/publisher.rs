use crate::codec::{DataValue, GoosePdu, UtcTime};

use super::EngineError;

const NS_PER_MS: u64 = 1_000_000;

/// Positive rational number `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, EngineError> {
        if num == 0 || den == 0 {
            return Err(EngineError::Profile(format!("ratio {num}/{den} must be positive")));
        }
        Ok(Ratio { num, den })
    }

    pub const fn integer(n: u64) -> Self {
        Ratio { num: n, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    fn gt_one(&self) -> bool {
        self.num > self.den
    }

    fn ge_one(&self) -> bool {
        self.num >= self.den
    }

    fn mul_floor(&self, v: u64) -> u64 {
        (u128::from(v) * u128::from(self.num) / u128::from(self.den)) as u64
    }
}

/// How the gap to the next retransmission evolves after an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntervalLaw {
    /// `t0`, then `min(previous * multiplier, tmax)`.
    Geometric {
        t0_ns: u64,
        multiplier: Ratio,
        tmax_ns: u64,
    },
    /// Explicit gap list replayed after every event; the last entry repeats.
    Table(Vec<u64>),
}

/// How the time-allowed-to-live field is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TatlPolicy {
    /// `factor * interval-until-next-frame`, rounded up to whole ms.
    Factor(Ratio),
    FixedMs(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetransmissionProfile {
    law: IntervalLaw,
    tatl: TatlPolicy,
}

impl RetransmissionProfile {
    pub fn geometric(t0_ns: u64, multiplier: Ratio, tmax_ns: u64) -> Result<Self, EngineError> {
        if t0_ns == 0 || t0_ns > tmax_ns {
            return Err(EngineError::Profile(format!(
                "need 0 < t0 ({t0_ns} ns) <= tmax ({tmax_ns} ns)"
            )));
        }
        if !multiplier.gt_one() {
            return Err(EngineError::Profile("multiplier must exceed 1".into()));
        }
        Ok(RetransmissionProfile {
            law: IntervalLaw::Geometric {
                t0_ns,
                multiplier,
                tmax_ns,
            },
            tatl: TatlPolicy::Factor(Ratio::integer(2)),
        })
    }

    /// Replays a measured gap sequence.
    pub fn table(gaps_ns: Vec<u64>) -> Result<Self, EngineError> {
        if gaps_ns.is_empty() || gaps_ns.contains(&0) {
            return Err(EngineError::Profile(
                "gap table must be non-empty with positive gaps".into(),
            ));
        }
        Ok(RetransmissionProfile {
            law: IntervalLaw::Table(gaps_ns),
            tatl: TatlPolicy::Factor(Ratio::integer(2)),
        })
    }

    pub fn with_tatl(mut self, tatl: TatlPolicy) -> Result<Self, EngineError> {
        match tatl {
            TatlPolicy::Factor(r) if !r.ge_one() => {
                return Err(EngineError::Profile("TATL factor must be >= 1".into()))
            }
            TatlPolicy::FixedMs(0) => {
                return Err(EngineError::Profile("fixed TATL must be positive".into()))
            }
            _ => {}
        }
        self.tatl = tatl;
        Ok(self)
    }

    pub fn law(&self) -> &IntervalLaw {
        &self.law
    }

    pub fn tatl(&self) -> TatlPolicy {
        self.tatl
    }

    /// Interval after `step` retransmissions (step 0 is the gap after the
    /// event frame itself).
    fn interval(&self, step: usize, previous: u64) -> u64 {
        match &self.law {
            IntervalLaw::Geometric {
                t0_ns,
                multiplier,
                tmax_ns,
            } => {
                if step == 0 {
                    *t0_ns
                } else {
                    multiplier.mul_floor(previous).min(*tmax_ns)
                }
            }
            IntervalLaw::Table(gaps) => gaps[step.min(gaps.len() - 1)],
        }
    }

    pub fn min_interval(&self) -> u64 {
        match &self.law {
            IntervalLaw::Geometric { t0_ns, .. } => *t0_ns,
            IntervalLaw::Table(g) => *g.iter().min().expect("non-empty"),
        }
    }

    pub fn max_interval(&self) -> u64 {
        match &self.law {
            IntervalLaw::Geometric { tmax_ns, .. } => *tmax_ns,
            IntervalLaw::Table(g) => *g.iter().max().expect("non-empty"),
        }
    }

    fn tatl_ms(&self, interval_ns: u64) -> u32 {
        match self.tatl {
            TatlPolicy::FixedMs(ms) => ms,
            TatlPolicy::Factor(r) => {
                let num = u128::from(interval_ns) * u128::from(r.num);
                let den = u128::from(r.den) * u128::from(NS_PER_MS);
                num.div_ceil(den).min(u128::from(u32::MAX)) as u32
            }
        }
    }
}

impl Default for RetransmissionProfile {
    /// 6.5 ms first gap, doubling, capped at 350 ms; TATL twice the gap.
    fn default() -> Self {
        RetransmissionProfile::geometric(6_500_000, Ratio::integer(2), 350_000_000)
            .expect("valid default")
    }
}

/// Control-block identity carried unchanged in every PDU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GooseIdentity {
    pub gocb_ref: String,
    pub dat_set: String,
    pub go_id: String,
    pub conf_rev: u32,
    pub test: bool,
    pub nds_com: bool,
}

/// Output of a publisher transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub pdu: GoosePdu,
    /// Delay until the next retransmission is due.
    pub next_timer_ns: u64,
}

/// Event-driven retransmission state of one GOOSE control block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublisherState {
    profile: RetransmissionProfile,
    identity: GooseIdentity,
    dataset: Vec<DataValue>,
    st_num: u32,
    sq_num: u32,
    current_interval_ns: u64,
    step: usize,
    event_time: UtcTime,
    time_quality: u8,
}

fn wrap_to_one(v: u32) -> u32 {
    if v == u32::MAX {
        1
    } else {
        v + 1
    }
}

impl PublisherState {
    /// `initial_data` fixes the dataset arity.
    pub fn new(
        profile: RetransmissionProfile,
        identity: GooseIdentity,
        initial_data: Vec<DataValue>,
    ) -> Self {
        let first = profile.min_interval();
        PublisherState {
            profile,
            identity,
            dataset: initial_data,
            st_num: 0,
            sq_num: 0,
            current_interval_ns: first,
            step: 0,
            event_time: UtcTime::default(),
            time_quality: 0x0A,
        }
    }

    pub fn st_num(&self) -> u32 {
        self.st_num
    }

    pub fn sq_num(&self) -> u32 {
        self.sq_num
    }

    pub fn current_interval_ns(&self) -> u64 {
        self.current_interval_ns
    }

    pub fn profile(&self) -> &RetransmissionProfile {
        &self.profile
    }

    pub fn dataset(&self) -> &[DataValue] {
        &self.dataset
    }

    /// State change: new stNum, sqNum back to 0, interval back to the first gap.
    pub fn publish_event(
        &mut self,
        new_data: Vec<DataValue>,
        now_unix_ns: u64,
    ) -> Result<Emission, EngineError> {
        if new_data.len() != self.dataset.len() {
            return Err(EngineError::DatasetArity {
                expected: self.dataset.len(),
                got: new_data.len(),
            });
        }
        self.dataset = new_data;
        self.st_num = wrap_to_one(self.st_num);
        self.sq_num = 0;
        self.step = 0;
        self.current_interval_ns = self.profile.interval(0, 0);
        self.event_time = UtcTime::from_unix_nanos(now_unix_ns, self.time_quality);
        Ok(self.emission())
    }

    /// Retransmission of the current state.
    pub fn on_timer(&mut self, _now_unix_ns: u64) -> Result<Emission, EngineError> {
        if self.st_num == 0 {
            return Err(EngineError::NothingPublished);
        }
        self.sq_num = wrap_to_one(self.sq_num);
        self.step += 1;
        self.current_interval_ns = self.profile.interval(self.step, self.current_interval_ns);
        Ok(self.emission())
    }

    fn emission(&self) -> Emission {
        Emission {
            pdu: GoosePdu {
                gocb_ref: self.identity.gocb_ref.clone(),
                time_allowed_to_live: self.profile.tatl_ms(self.current_interval_ns),
                dat_set: self.identity.dat_set.clone(),
                go_id: self.identity.go_id.clone(),
                t: self.event_time,
                st_num: self.st_num,
                sq_num: self.sq_num,
                test: self.identity.test,
                conf_rev: self.identity.conf_rev,
                nds_com: self.identity.nds_com,
                num_dat_set_entries: self.dataset.len() as u32,
                all_data: self.dataset.clone(),
            },
            next_timer_ns: self.current_interval_ns,
        }
    }
}
