//! Exact sampling of piecewise-constant Poisson processes.
//!
//! Intensities are represented as sequences of constant-rate segments, so
//! every event time is drawn by exponential inter-arrival sampling; no
//! thinning or numerical quadrature is involved.

use rand::RngCore;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::exponential;

/// Default guard against runaway intensities.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Realized output of a counting process on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    horizon: f64,
    events: Vec<f64>,
}

impl Timeline {
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        Ok(Self {
            horizon,
            events: Vec::new(),
        })
    }

    /// Build a timeline from explicit event times, checking ordering and range.
    pub fn from_events(horizon: f64, events: Vec<f64>) -> Result<Self> {
        let mut tl = Self::new(horizon)?;
        for t in events {
            tl.push(t)?;
        }
        Ok(tl)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_event(&self) -> Option<f64> {
        self.events.first().copied()
    }

    pub fn last_event(&self) -> Option<f64> {
        self.events.last().copied()
    }

    /// Number of events in the half-open interval `(a, b]`.
    pub fn count_between(&self, a: f64, b: f64) -> usize {
        if b <= a {
            return 0;
        }
        let lo = self.events.partition_point(|&t| t <= a);
        let hi = self.events.partition_point(|&t| t <= b);
        hi - lo
    }

    /// Append an event; it must lie after every existing event and inside
    /// `[0, horizon]`.
    pub fn push(&mut self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::invalid(format!(
                "event time {t} outside [0, {}]",
                self.horizon
            )));
        }
        if let Some(last) = self.last_event() {
            if t <= last {
                return Err(Error::invalid(format!(
                    "event times must be strictly increasing ({t} after {last})"
                )));
            }
        }
        self.events.push(t);
        Ok(())
    }
}

/// A constant intensity issued at some time and in force until `valid_until`.
///
/// The segment governs the half-open interval `(issued, valid_until]`: a count
/// landing exactly on `valid_until` belongs to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSegment {
    pub rate: f64,
    pub valid_until: f64,
}

impl RateSegment {
    pub const fn new(rate: f64, valid_until: f64) -> Self {
        Self { rate, valid_until }
    }

    /// Zero intensity up to `valid_until`.
    pub const fn zero_until(valid_until: f64) -> Self {
        Self::new(0.0, valid_until)
    }

    /// Zero intensity with no expiry.
    pub const fn silent() -> Self {
        Self::zero_until(f64::INFINITY)
    }
}

/// Time of the next event of a constant-rate process started at
/// `current_time`, or `None` if it falls after `segment.valid_until`.
///
/// A zero-rate segment never produces an event and consumes no randomness.
pub fn sample_next_event<R: RngCore + ?Sized>(
    current_time: f64,
    segment: RateSegment,
    rng: &mut R,
) -> Result<Option<f64>> {
    if !(segment.rate >= 0.0 && segment.rate.is_finite()) {
        return Err(Error::invalid(format!(
            "rate must be finite and >= 0, got {}",
            segment.rate
        )));
    }
    if current_time.is_nan() || segment.valid_until.is_nan() || current_time >= segment.valid_until {
        return Err(Error::invalid(format!(
            "segment expired: current time {current_time} >= valid_until {}",
            segment.valid_until
        )));
    }
    if segment.rate == 0.0 {
        return Ok(None);
    }
    let mut t = current_time + exponential(rng, segment.rate);
    if t <= current_time {
        // inter-arrival below the resolution of `current_time`
        t = current_time.next_up();
    }
    Ok((t <= segment.valid_until).then_some(t))
}

/// One realization of a rate-`rate` homogeneous Poisson process on
/// `[0, horizon]`.
pub fn sample_homogeneous<R: RngCore + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Timeline> {
    sample_homogeneous_capped(rate, horizon, rng, DEFAULT_EVENT_CAP)
}

pub fn sample_homogeneous_capped<R: RngCore + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
    cap: usize,
) -> Result<Timeline> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("rate must be finite and >= 0, got {rate}")));
    }
    let mut timeline = Timeline::new(horizon)?;
    if rate == 0.0 || horizon == 0.0 {
        return Ok(timeline);
    }
    let segment = RateSegment::new(rate, horizon);
    let mut now = 0.0;
    while let Some(t) = sample_next_event(now, segment, rng)? {
        if timeline.len() == cap {
            return Err(Error::RunawayIntensity { cap });
        }
        timeline.push(t)?;
        now = t;
        if now >= horizon {
            break;
        }
    }
    Ok(timeline)
}

/// Poisson probability `e^{-mean} mean^count / count!`.
pub fn poisson_pmf(mean: f64, count: u64) -> Result<f64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("mean must be finite and >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(if count == 0 { 1.0 } else { 0.0 });
    }
    if count <= 30 && mean < 500.0 {
        let mut p = (-mean).exp();
        for k in 1..=count {
            p *= mean / k as f64;
        }
        return Ok(p);
    }
    let k = count as f64;
    Ok((k * mean.ln() - mean - ln_gamma(k + 1.0)).exp())
}
