//! The Poisson channel with dark current and instantaneous, noiseless
//! feedback.
//!
//! An [`EncoderPolicy`] is asked for a [`RateSegment`] at time 0, right after
//! every registered count, and whenever its previous segment expires. The
//! segment fixes the input intensity on `(now, valid_until]`, so the intensity
//! on any interval depends only on counts strictly before it: the policy is
//! predictable with respect to the count-feedback history by construction.
//!
//! The channel output has intensity `input + dark_current`. Transmitted energy
//! integrates the input only; dark current produces counts for free.

use crate::analytics::{Estimate, MeanAccumulator, CHECK_SIGMAS};
use crate::error::{Error, Result};
use crate::montecarlo;
use crate::process::{sample_next_event, RateSegment, Timeline, DEFAULT_EVENT_CAP};
use crate::rng::{RandomSource, SimRng};

pub type MessageId = usize;

/// Dark current and the optional peak-power cap on the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub dark_current: f64,
    pub peak_power: Option<f64>,
}

impl ChannelParams {
    pub fn new(dark_current: f64, peak_power: Option<f64>) -> Result<Self> {
        if !(dark_current >= 0.0 && dark_current.is_finite()) {
            return Err(Error::invalid(format!(
                "dark current must be finite and >= 0, got {dark_current}"
            )));
        }
        if let Some(a) = peak_power {
            if a.is_nan() || a <= 0.0 {
                return Err(Error::invalid(format!("peak power must be > 0, got {a}")));
            }
        }
        Ok(Self {
            dark_current,
            peak_power,
        })
    }

    pub fn with_dark_current(dark_current: f64) -> Result<Self> {
        Self::new(dark_current, None)
    }

    pub fn noiseless() -> Self {
        Self {
            dark_current: 0.0,
            peak_power: None,
        }
    }

    fn admit(&self, seg: &RateSegment, now: f64) -> Result<()> {
        if !(seg.rate >= 0.0 && seg.rate.is_finite()) {
            return Err(Error::PolicyViolation {
                time: now,
                reason: format!("input rate {} is not a finite nonnegative number", seg.rate),
            });
        }
        if let Some(cap) = self.peak_power {
            if seg.rate > cap {
                return Err(Error::PolicyViolation {
                    time: now,
                    reason: format!("input rate {} exceeds peak power {cap}", seg.rate),
                });
            }
        }
        check_expiry(seg, now)
    }
}

fn check_expiry(seg: &RateSegment, now: f64) -> Result<()> {
    if seg.valid_until > now {
        Ok(())
    } else {
        Err(Error::PolicyViolation {
            time: now,
            reason: format!("segment expires at {} which is not after now", seg.valid_until),
        })
    }
}

/// A predictable input-intensity program.
///
/// `history` holds every count registered up to and including `now`. `rng` is
/// the trial's private stream; policies are otherwise stateless, so one
/// instance can serve many trials concurrently.
pub trait EncoderPolicy: Sync {
    fn query(&self, message: MessageId, now: f64, history: &Timeline, rng: &mut SimRng)
        -> RateSegment;
}

/// A predictable nonnegative weight `C(t)`, queried under the same protocol
/// as [`EncoderPolicy`]. The returned segment's `rate` is the weight value.
pub trait WeightProcess: Sync {
    fn query(&self, now: f64, history: &Timeline, rng: &mut SimRng) -> RateSegment;
}

/// Deterministic map from the observed counts to a message.
pub trait Decoder: Sync {
    fn decode(&self, timeline: &Timeline) -> MessageId;
}

impl<F> EncoderPolicy for F
where
    F: Fn(MessageId, f64, &Timeline) -> RateSegment + Sync,
{
    fn query(&self, message: MessageId, now: f64, history: &Timeline, _: &mut SimRng) -> RateSegment {
        self(message, now, history)
    }
}

/// The all-zero input.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl EncoderPolicy for Silent {
    fn query(&self, _: MessageId, _: f64, _: &Timeline, _: &mut SimRng) -> RateSegment {
        RateSegment::silent()
    }
}

/// Constant weight on the whole horizon.
#[derive(Debug, Clone, Copy)]
pub struct ConstantWeight(pub f64);

impl WeightProcess for ConstantWeight {
    fn query(&self, _: f64, _: &Timeline, _: &mut SimRng) -> RateSegment {
        RateSegment::new(self.0, f64::INFINITY)
    }
}

/// `C(t) = 1{t <= T1}`: one up to and including the first count, zero after.
#[derive(Debug, Clone, Copy, Default)]
pub struct UntilFirstCount;

impl WeightProcess for UntilFirstCount {
    fn query(&self, _: f64, history: &Timeline, _: &mut SimRng) -> RateSegment {
        if history.is_empty() {
            RateSegment::new(1.0, f64::INFINITY)
        } else {
            RateSegment::silent()
        }
    }
}

/// Piece of the input actually traversed on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversedSegment {
    pub rate: f64,
    pub duration: f64,
}

/// Exact energy of a path: the sum of `rate * duration` over its pieces.
pub fn path_energy<I>(segments: I) -> Result<f64>
where
    I: IntoIterator<Item = TraversedSegment>,
{
    let mut meter = EnergyMeter::default();
    for seg in segments {
        if seg.duration.is_nan() || seg.duration < 0.0 {
            return Err(Error::invalid(format!(
                "segment duration must be >= 0, got {}",
                seg.duration
            )));
        }
        if seg.rate.is_nan() || seg.rate < 0.0 {
            return Err(Error::invalid(format!("segment rate must be >= 0, got {}", seg.rate)));
        }
        meter.add(seg);
    }
    Ok(meter.total)
}

#[derive(Debug, Default)]
struct EnergyMeter {
    total: f64,
}

impl EnergyMeter {
    #[inline]
    fn add(&mut self, seg: TraversedSegment) {
        if seg.rate > 0.0 {
            self.total += seg.rate * seg.duration;
        }
    }
}

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub message: MessageId,
    pub timeline: Timeline,
    /// Transmitted photons on this path; dark current excluded.
    pub energy: f64,
    pub decoded: MessageId,
    pub correct: bool,
}

/// Raw outcome of walking one path through the feedback loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub timeline: Timeline,
    pub energy: f64,
    /// `sum over counts of C(count time)`.
    pub weighted_counts: f64,
    /// `integral of C(t) (X(t) + dark) dt`, exact per path.
    pub weighted_compensator: f64,
}

/// Walk one path of the feedback loop.
///
/// The policy segment (and weight segment, if any) is cached until it expires
/// or a count is registered. Between refreshes the total intensity is
/// constant, so the next count is drawn exactly by exponential inter-arrival
/// sampling on the channel stream of `source`.
pub fn walk_path(
    policy: &dyn EncoderPolicy,
    weight: Option<&dyn WeightProcess>,
    message: MessageId,
    params: &ChannelParams,
    horizon: f64,
    source: RandomSource,
) -> Result<PathOutcome> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be finite and > 0, got {horizon}")));
    }
    let mut timeline = Timeline::new(horizon)?;
    let mut channel = source.channel_rng();
    let mut private = source.private_rng();
    let mut meter = EnergyMeter::default();
    let mut weighted_counts = 0.0;
    let mut compensator = 0.0;
    let mut input: Option<RateSegment> = None;
    let mut c: Option<RateSegment> = None;
    let mut now = 0.0;

    while now < horizon {
        let seg = match input {
            Some(s) if s.valid_until > now => s,
            _ => {
                let s = policy.query(message, now, &timeline, &mut private);
                params.admit(&s, now)?;
                input = Some(s);
                s
            }
        };
        let w = match weight {
            None => RateSegment::new(0.0, f64::INFINITY),
            Some(wp) => match c {
                Some(s) if s.valid_until > now => s,
                _ => {
                    let s = wp.query(now, &timeline, &mut private);
                    if !(s.rate >= 0.0 && s.rate.is_finite()) {
                        return Err(Error::PolicyViolation {
                            time: now,
                            reason: format!("weight {} is not a finite nonnegative number", s.rate),
                        });
                    }
                    check_expiry(&s, now)?;
                    c = Some(s);
                    s
                }
            },
        };

        let end = seg.valid_until.min(w.valid_until).min(horizon);
        let total = seg.rate + params.dark_current;
        let next = sample_next_event(now, RateSegment::new(total, end), &mut channel)?;
        let until = next.unwrap_or(end);
        let elapsed = until - now;
        meter.add(TraversedSegment {
            rate: seg.rate,
            duration: elapsed,
        });
        if w.rate > 0.0 {
            compensator += w.rate * total * elapsed;
        }
        if let Some(t) = next {
            if timeline.len() == DEFAULT_EVENT_CAP {
                return Err(Error::RunawayIntensity {
                    cap: DEFAULT_EVENT_CAP,
                });
            }
            timeline.push(t)?;
            weighted_counts += w.rate;
            // new information: both programs are re-queried
            input = None;
            c = None;
        }
        now = until;
    }

    Ok(PathOutcome {
        timeline,
        energy: meter.total,
        weighted_counts,
        weighted_compensator: compensator,
    })
}

/// Simulate one transmission of `message` and decode it.
pub fn run_trial(
    policy: &dyn EncoderPolicy,
    decoder: &dyn Decoder,
    message: MessageId,
    params: &ChannelParams,
    horizon: f64,
    source: RandomSource,
) -> Result<TrialResult> {
    let path = walk_path(policy, None, message, params, horizon, source)?;
    let decoded = decoder.decode(&path.timeline);
    Ok(TrialResult {
        message,
        timeline: path.timeline,
        energy: path.energy,
        decoded,
        correct: decoded == message,
    })
}

/// Monte Carlo comparison of the two sides of the intensity identity
/// `E[int C dY] = E[int C (X + dark) dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Per-path difference `lhs - rhs`; its stderr is the combined stderr of
    /// the comparison since both sides come from the same paths.
    pub diff: Estimate,
    pub pass: bool,
}

impl IdentityReport {
    pub fn from_accumulators(
        lhs: &MeanAccumulator,
        rhs: &MeanAccumulator,
        diff: &MeanAccumulator,
    ) -> Result<Self> {
        let lhs = lhs.estimate()?;
        let rhs = rhs.estimate()?;
        let diff = diff.estimate()?;
        let pass = (lhs.mean - rhs.mean).abs() <= CHECK_SIGMAS * diff.stderr;
        Ok(Self {
            lhs,
            rhs,
            diff,
            pass,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct IdentityAcc {
    lhs: MeanAccumulator,
    rhs: MeanAccumulator,
    diff: MeanAccumulator,
}

/// Minimum trial count accepted by [`verify_intensity_identity`].
pub const MIN_IDENTITY_TRIALS: u64 = 1_000;

#[allow(clippy::too_many_arguments)]
pub fn verify_intensity_identity(
    policy: &dyn EncoderPolicy,
    weight: &dyn WeightProcess,
    message: MessageId,
    params: &ChannelParams,
    horizon: f64,
    n_trials: u64,
    seed: u64,
) -> Result<IdentityReport> {
    if n_trials < MIN_IDENTITY_TRIALS {
        return Err(Error::invalid(format!(
            "identity check needs at least {MIN_IDENTITY_TRIALS} trials, got {n_trials}"
        )));
    }
    let chunks = montecarlo::map_chunks(n_trials, |range| {
        let mut acc = IdentityAcc::default();
        for i in range {
            let src = RandomSource::for_trial(seed, message, i);
            let path = walk_path(policy, Some(weight), message, params, horizon, src)?;
            acc.lhs.push(path.weighted_counts);
            acc.rhs.push(path.weighted_compensator);
            acc.diff.push(path.weighted_counts - path.weighted_compensator);
        }
        Ok(acc)
    })?;
    let mut total = IdentityAcc::default();
    for c in &chunks {
        total.lhs.merge(&c.lhs);
        total.rhs.merge(&c.rhs);
        total.diff.merge(&c.diff);
    }
    IdentityReport::from_accumulators(&total.lhs, &total.rhs, &total.diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FirstCountOf(f64);

    impl EncoderPolicy for FirstCountOf {
        fn query(&self, _: MessageId, _: f64, h: &Timeline, _: &mut SimRng) -> RateSegment {
            if h.is_empty() {
                RateSegment::new(self.0, f64::INFINITY)
            } else {
                RateSegment::silent()
            }
        }
    }

    struct AnyCount;

    impl Decoder for AnyCount {
        fn decode(&self, t: &Timeline) -> MessageId {
            usize::from(!t.is_empty())
        }
    }

    #[test]
    fn path_energy_examples() {
        assert_eq!(path_energy(std::iter::empty()).unwrap(), 0.0);
        let one = [TraversedSegment { rate: 10.0, duration: 0.1 }];
        assert_eq!(path_energy(one).unwrap(), 1.0);
        let two = [
            TraversedSegment { rate: 3.0, duration: 0.5 },
            TraversedSegment { rate: 0.0, duration: 2.0 },
        ];
        assert_eq!(path_energy(two).unwrap(), 1.5);
        let bad = [TraversedSegment { rate: 1.0, duration: -0.1 }];
        assert!(matches!(path_energy(bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn silent_without_dark_current_is_empty() {
        let params = ChannelParams::noiseless();
        for i in 0..1000 {
            let r = run_trial(&Silent, &AnyCount, 0, &params, 7.0, RandomSource::new(1, i)).unwrap();
            assert!(r.timeline.is_empty());
            assert_eq!(r.energy, 0.0);
            assert!(r.correct);
        }
    }

    #[test]
    fn dark_current_costs_no_energy() {
        let params = ChannelParams::with_dark_current(5.0).unwrap();
        let mut counted = 0;
        for i in 0..1000 {
            let r = run_trial(&Silent, &AnyCount, 0, &params, 1.0, RandomSource::new(2, i)).unwrap();
            assert_eq!(r.energy, 0.0);
            counted += r.timeline.len();
        }
        assert!(counted > 0);
    }

    #[test]
    fn negative_rate_is_policy_violation() {
        let bad = |_: MessageId, _: f64, _: &Timeline| RateSegment::new(-1.0, 1.0);
        let err = run_trial(&bad, &AnyCount, 1, &ChannelParams::noiseless(), 1.0, RandomSource::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::PolicyViolation { .. }));
    }

    #[test]
    fn peak_cap_is_enforced() {
        let params = ChannelParams::new(0.0, Some(2.0)).unwrap();
        let err = run_trial(&FirstCountOf(3.0), &AnyCount, 1, &params, 1.0, RandomSource::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::PolicyViolation { .. }));
        assert!(run_trial(&FirstCountOf(2.0), &AnyCount, 1, &params, 1.0, RandomSource::new(0, 0)).is_ok());
    }

    #[test]
    fn stale_segment_is_policy_violation() {
        let stuck = |_: MessageId, now: f64, _: &Timeline| RateSegment::new(1.0, now);
        let err = run_trial(&stuck, &AnyCount, 1, &ChannelParams::noiseless(), 1.0, RandomSource::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::PolicyViolation { .. }));
    }

    #[test]
    fn runaway_intensity_is_reported() {
        let flood = |_: MessageId, _: f64, _: &Timeline| RateSegment::new(1e9, f64::INFINITY);
        let err = run_trial(&flood, &AnyCount, 1, &ChannelParams::noiseless(), 1.0, RandomSource::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::RunawayIntensity { .. }));
    }

    #[test]
    fn energy_is_rate_times_time_to_first_count() {
        let params = ChannelParams::noiseless();
        for i in 0..200 {
            let r = run_trial(&FirstCountOf(2.0), &AnyCount, 1, &params, 3.0, RandomSource::new(9, i)).unwrap();
            let t1 = r.timeline.first_event().unwrap_or(3.0);
            assert!((r.energy - 2.0 * t1).abs() < 1e-12);
            assert!(r.timeline.len() <= 1);
        }
    }

    #[test]
    fn zero_weight_gives_zero_sides() {
        let params = ChannelParams::with_dark_current(1.0).unwrap();
        let r = verify_intensity_identity(&FirstCountOf(2.0), &ConstantWeight(0.0), 1, &params, 2.0, 1000, 3)
            .unwrap();
        assert_eq!(r.lhs.mean, 0.0);
        assert_eq!(r.rhs.mean, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn identity_needs_enough_trials() {
        let r = verify_intensity_identity(&Silent, &ConstantWeight(1.0), 0, &ChannelParams::noiseless(), 1.0, 999, 0);
        assert!(r.is_err());
    }
}
