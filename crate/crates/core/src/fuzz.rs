//! Randomly generated predictable encoder policies and weight processes.
//!
//! Every generated program is piecewise constant in time and may react to the
//! count history or draw on private randomness, but never looks past `now`.
//! They exercise the feedback loop far beyond the slot schemes.

use rand::Rng;

use crate::channel::{ChannelParams, EncoderPolicy, MessageId, WeightProcess};
use crate::process::{RateSegment, Timeline};
use crate::rng::{RandomSource, SimRng};

/// Piecewise-constant profile: `values[i]` holds on `(breaks[i-1], breaks[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl Profile {
    fn at(&self, now: f64) -> (f64, f64) {
        let i = self.breaks.partition_point(|&b| b <= now);
        let until = self.breaks.get(i).copied().unwrap_or(f64::INFINITY);
        (self.values[i], until)
    }

    fn random(rng: &mut SimRng, horizon: f64, max_value: f64) -> Self {
        let pieces = rng.random_range(1..=6);
        let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.random::<f64>() * horizon).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks.retain(|&b| b > 0.0);
        let values = (0..=breaks.len())
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random::<f64>() * max_value
                }
            })
            .collect();
        Self { breaks, values }
    }
}

const MAX_SCALED_COUNTS: usize = 4;

/// How a program reacts to what it has seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reaction {
    /// Ignore the history.
    Static,
    /// Multiply by `factor^min(counts so far, 4)`. The cap keeps
    /// self-exciting programs (`factor > 1`) from running away.
    CountScaled(f64),
    /// Multiply by a fresh uniform factor in `[0.5, 1.5)` at every query.
    Jitter,
    /// Multiply by `boost` for `window` time units after each count.
    AfterCount { boost: f64, window: f64 },
}

impl Reaction {
    fn random(rng: &mut SimRng) -> Self {
        match rng.random_range(0..4) {
            0 => Reaction::Static,
            1 => Reaction::CountScaled(rng.random_range(0.2..2.0)),
            2 => Reaction::Jitter,
            _ => Reaction::AfterCount {
                boost: rng.random_range(0.0..3.0),
                window: rng.random_range(0.05..0.5),
            },
        }
    }

    fn apply(&self, base: (f64, f64), now: f64, history: &Timeline, rng: &mut SimRng) -> RateSegment {
        let (value, until) = base;
        match *self {
            Reaction::Static => RateSegment::new(value, until),
            Reaction::CountScaled(f) => RateSegment::new(value * f.powi(history.len().min(MAX_SCALED_COUNTS) as i32), until),
            Reaction::Jitter => RateSegment::new(value * (0.5 + rng.random::<f64>()), until),
            Reaction::AfterCount { boost, window } => match history.last_event() {
                Some(last) if now < last + window => {
                    RateSegment::new(value * boost, until.min(last + window))
                }
                _ => RateSegment::new(value, until),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzPolicy {
    pub profile: Profile,
    pub reaction: Reaction,
    pub stop_at_first_count: bool,
}

impl EncoderPolicy for FuzzPolicy {
    fn query(&self, _: MessageId, now: f64, history: &Timeline, rng: &mut SimRng) -> RateSegment {
        if self.stop_at_first_count && !history.is_empty() {
            return RateSegment::silent();
        }
        self.reaction.apply(self.profile.at(now), now, history, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuzzWeight {
    /// `1{t <= T1}`.
    UntilFirstCount,
    Reactive { profile: Profile, reaction: Reaction },
}

impl WeightProcess for FuzzWeight {
    fn query(&self, now: f64, history: &Timeline, rng: &mut SimRng) -> RateSegment {
        match self {
            FuzzWeight::UntilFirstCount => {
                if history.is_empty() {
                    RateSegment::new(1.0, f64::INFINITY)
                } else {
                    RateSegment::silent()
                }
            }
            FuzzWeight::Reactive { profile, reaction } => {
                reaction.apply(profile.at(now), now, history, rng)
            }
        }
    }
}

/// One generated identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzCase {
    pub policy: FuzzPolicy,
    pub weight: FuzzWeight,
    pub params: ChannelParams,
    pub horizon: f64,
}

fn generator(seed: u64, index: u64) -> SimRng {
    RandomSource::new(RandomSource::derive_seed(seed, index), u64::MAX).channel_rng()
}

fn random_policy(rng: &mut SimRng, horizon: f64, stop_at_first_count: bool) -> FuzzPolicy {
    FuzzPolicy {
        profile: Profile::random(rng, horizon, 5.0),
        reaction: Reaction::random(rng),
        stop_at_first_count,
    }
}

/// Policy/weight pair `index` of the stream generated by `seed`. Roughly one
/// case in four pairs a stop-at-first-count policy with `1{t <= T1}` on a
/// channel without dark current.
pub fn identity_case(seed: u64, index: u64) -> FuzzCase {
    let mut rng = generator(seed, index);
    let horizon = rng.random_range(0.5..3.0);
    if rng.random_bool(0.25) {
        return FuzzCase {
            policy: random_policy(&mut rng, horizon, true),
            weight: FuzzWeight::UntilFirstCount,
            params: ChannelParams::noiseless(),
            horizon,
        };
    }
    let dark = [0.0, 0.5, 2.0][rng.random_range(0..3)];
    let stop = rng.random_bool(0.3);
    let policy = random_policy(&mut rng, horizon, stop);
    let weight = FuzzWeight::Reactive {
        profile: Profile::random(&mut rng, horizon, 3.0),
        reaction: Reaction::random(&mut rng),
    };
    FuzzCase {
        policy,
        weight,
        params: ChannelParams {
            dark_current: dark,
            peak_power: None,
        },
        horizon,
    }
}

/// Stop-at-first-count policy `index` for the converse check, together with
/// its horizon. The channel has no dark current.
pub fn stop_policy(seed: u64, index: u64) -> (FuzzPolicy, f64) {
    let mut rng = generator(seed ^ 0xc0_4e75e, index);
    let horizon = rng.random_range(0.2..3.0);
    (random_policy(&mut rng, horizon, true), horizon)
}
