//! Closed-form performance of the stop-at-first-count schemes, the converse
//! energy floor, and the Monte Carlo statistics everything is checked with.
//!
//! Probabilities get Wilson score intervals (error rates of interest sit near
//! zero, where the Wald interval collapses); energies get normal intervals.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Default confidence level of [`Estimate`] intervals.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Pass/fail threshold, in standard errors, used by every identity and
/// agreement check.
pub const CHECK_SIGMAS: f64 = 4.0;

/// Per-message and message-averaged error probability and energy.
/// Messages are equiprobable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub p_err_given: Vec<f64>,
    pub p_err_avg: f64,
    pub energy_given: Vec<f64>,
    pub energy_avg: f64,
}

impl PerfReport {
    pub fn from_given(p_err_given: Vec<f64>, energy_given: Vec<f64>) -> Self {
        let p_err_avg = mean_of(&p_err_given);
        let energy_avg = mean_of(&energy_given);
        Self {
            p_err_given,
            p_err_avg,
            energy_given,
            energy_avg,
        }
    }

    pub fn messages(&self) -> usize {
        self.p_err_given.len()
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and > 0, got {x}")))
    }
}

fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {x}")))
    }
}

fn check_messages(m: usize) -> Result<()> {
    if m >= 2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("message count must be >= 2, got {m}")))
    }
}

/// Binary scheme without dark current: message 1 sends `power` until the
/// first count or `horizon`.
pub fn closed_form_binary(power: f64, horizon: f64) -> Result<PerfReport> {
    closed_form_mary(2, power, horizon)
}

/// Binary scheme over a window `window` with dark current `dark`.
///
/// Message 0 errs on any spurious count: `1 - e^{-dark window}`. Message 1
/// errs when no count at all arrives at total rate `power + dark`, and spends
/// `power E[min(T1, window)]` with `T1 ~ Exp(power + dark)`.
pub fn closed_form_binary_dark(power: f64, window: f64, dark: f64) -> Result<PerfReport> {
    check_positive("A", power)?;
    check_positive("horizon", window)?;
    check_nonnegative("dark current", dark)?;
    let total = power + dark;
    let miss = (-total * window).exp();
    let spurious = -(-dark * window).exp_m1();
    let energy = power / total * (1.0 - miss);
    Ok(PerfReport::from_given(vec![spurious, miss], vec![0.0, energy]))
}

/// M-ary slot scheme without dark current. Each nonzero message owns a slot of
/// width `horizon / (M - 1)` and errs only if its slot passes without a count.
pub fn closed_form_mary(messages: usize, power: f64, horizon: f64) -> Result<PerfReport> {
    check_messages(messages)?;
    check_positive("A", power)?;
    check_positive("horizon", horizon)?;
    let slot = horizon / (messages - 1) as f64;
    let miss = (-power * slot).exp();
    // energy of a nonzero message is P(count in its slot) = 1 - miss
    let hit = 1.0 - miss;
    let mut p_err = vec![miss; messages];
    let mut energy = vec![hit; messages];
    p_err[0] = 0.0;
    energy[0] = 0.0;
    Ok(PerfReport::from_given(p_err, energy))
}

/// Union bound on the error probability of any message of the M-ary scheme
/// with dark current: a spurious count anywhere in the window, or no signal
/// count in the message's slot.
pub fn mary_dark_error_bound(messages: usize, power: f64, window: f64, dark: f64) -> Result<f64> {
    check_messages(messages)?;
    check_positive("A", power)?;
    check_positive("horizon", window)?;
    check_nonnegative("dark current", dark)?;
    let spurious = -(-dark * window).exp_m1();
    let miss = (-power * window / (messages - 1) as f64).exp();
    Ok((spurious + miss).min(1.0))
}

/// Least average energy, in photons, with which `messages` equiprobable
/// messages can be sent reliably: `(M - 1) / M`.
pub fn converse_energy_bound(messages: usize) -> Result<f64> {
    check_messages(messages)?;
    Ok((messages - 1) as f64 / messages as f64)
}

/// Energy floor for a target average error `epsilon`: a nonzero message that
/// errs with probability `q` spends at least `1 - q`, so
/// `energy_avg >= (M - 1)/M - p_err_avg`.
pub fn energy_floor_at_error(messages: usize, epsilon: f64) -> Result<f64> {
    let bound = converse_energy_bound(messages)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    Ok((bound - epsilon).max(0.0))
}

/// A Monte Carlo statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Proportion estimate with a 95% Wilson score interval.
pub fn estimate_bernoulli(successes: u64, n: u64) -> Result<Estimate> {
    estimate_bernoulli_at(successes, n, DEFAULT_LEVEL)
}

pub fn estimate_bernoulli_at(successes: u64, n: u64, level: f64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::invalid("bernoulli estimate needs n >= 1"));
    }
    if successes > n {
        return Err(Error::invalid(format!("successes ({successes}) exceed trials ({n})")));
    }
    let z = z_for_level(level)?;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let (lo, hi) = wilson_interval(p, nf, z);
    Ok(Estimate {
        n,
        mean: p,
        stderr: (p * (1.0 - p) / nf).sqrt(),
        ci_low: lo.min(p),
        ci_high: hi.max(p),
        level,
    })
}

fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Sample mean with a normal 95% interval.
pub fn estimate_mean(samples: &[f64]) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "mean estimate needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut acc = MeanAccumulator::default();
    samples.iter().for_each(|&x| acc.push(x));
    acc.estimate()
}

/// Streaming mean/variance (Welford), mergeable across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.n as f64 / nf;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / nf;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sample_variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Result<Estimate> {
        self.estimate_at(DEFAULT_LEVEL)
    }

    /// Estimate with a normal interval at `level`. A single sample gives a
    /// degenerate interval.
    pub fn estimate_at(&self, level: f64) -> Result<Estimate> {
        if self.n == 0 {
            return Err(Error::invalid("mean estimate needs at least 1 sample"));
        }
        let z = z_for_level(level)?;
        let se = self.stderr();
        Ok(Estimate {
            n: self.n,
            mean: self.mean,
            stderr: se,
            ci_low: self.mean - z * se,
            ci_high: self.mean + z * se,
            level,
        })
    }
}

/// Normal-approximation estimate of the average of independent estimates.
pub fn average_of(estimates: &[Estimate], level: f64) -> Result<Estimate> {
    if estimates.is_empty() {
        return Err(Error::invalid("cannot average zero estimates"));
    }
    let k = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.mean).sum::<f64>() / k;
    let se = estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k;
    let z = z_for_level(level)?;
    Ok(Estimate {
        n: estimates.iter().map(|e| e.n).sum(),
        mean,
        stderr: se,
        ci_low: mean - z * se,
        ci_high: mean + z * se,
        level,
    })
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against a discrete law.
///
/// Cells are `0, 1, 2, ...` and a final tail cell collecting everything at or
/// beyond the last cell; adjacent cells are pooled until each expects at least
/// five observations.
pub fn chi_square_gof<F>(observed: &[u64], pmf: F) -> Result<ChiSquareTest>
where
    F: Fn(u64) -> Result<f64>,
{
    let total: u64 = observed.iter().sum();
    if total == 0 || observed.is_empty() {
        return Err(Error::invalid("chi-square test needs observations"));
    }
    let n = total as f64;
    let k = observed.len();
    let mut expected = Vec::with_capacity(k);
    let mut head = 0.0;
    for v in 0..k - 1 {
        let p = pmf(v as u64)?;
        head += p;
        expected.push(p * n);
    }
    expected.push((1.0 - head).max(0.0) * n);

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        obs_acc += *o as f64;
        exp_acc += e;
        if exp_acc >= 5.0 {
            cells.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs_acc;
                last.1 += exp_acc;
            }
            None => cells.push((obs_acc, exp_acc)),
        }
    }
    if cells.len() < 2 {
        return Err(Error::invalid("chi-square test needs at least two pooled cells"));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}
