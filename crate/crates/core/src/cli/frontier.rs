//! `frontier`: the least average energy at which the scheme family reaches a
//! target average error probability.
//!
//! For a fixed power `A` the error probability is unimodal in the horizon (it
//! falls while the signal gets more time, and rises again once spurious counts
//! dominate) while the energy only grows with it. So for each `A` on a log grid
//! the search locates the error-minimizing horizon by golden section, and then
//! bisects for the shortest horizon meeting the target. The cheapest such point
//! over `A` wins and is certified by an independent Monte Carlo run.

use serde::Serialize;

use crate::analytics::{
    converse_energy_bound, energy_floor_at_error, Estimate, PerfReport, CHECK_SIGMAS, DEFAULT_LEVEL,
};
use crate::cli::report::{fmt_f64, Record};
use crate::error::{Error, Result};
use crate::montecarlo::simulate_all;
use crate::schemes::{Scheme, SchemeKind, SchemeSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierQuery {
    pub epsilon: f64,
    pub messages: usize,
    pub dark_current: f64,
    pub power_range: (f64, f64),
    pub horizon_range: (f64, f64),
    /// Trials per message for each Monte Carlo probe (kinds without closed
    /// form only).
    pub probe_trials: u64,
    /// Trials per message for the certificate.
    pub trials: u64,
    pub seed: u64,
}

pub const DEFAULT_POWER_RANGE: (f64, f64) = (1.0, 1e5);
pub const DEFAULT_HORIZON_RANGE: (f64, f64) = (1e-5, 10.0);
pub const DEFAULT_PROBE_TRIALS: u64 = 10_000;

impl FrontierQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("frontier.epsilon", format!("must lie strictly inside (0, 1), got {}", self.epsilon)));
        }
        if self.messages < 2 {
            return Err(Error::config("frontier.M", format!("must be >= 2, got {}", self.messages)));
        }
        if !(self.dark_current >= 0.0 && self.dark_current.is_finite()) {
            return Err(Error::config("frontier.dark_current", format!("must be finite and >= 0, got {}", self.dark_current)));
        }
        for (field, (lo, hi)) in [("frontier.A", self.power_range), ("frontier.horizon", self.horizon_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::config(field, format!("range [{lo}, {hi}] must be nonempty, positive and finite")));
            }
        }
        if self.trials == 0 || self.probe_trials == 0 {
            return Err(Error::config("run.trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn kind(&self) -> SchemeKind {
        SchemeKind::natural(self.messages, self.dark_current)
    }

    fn spec(&self, power: f64, horizon: f64) -> SchemeSpec {
        SchemeSpec {
            kind: self.kind(),
            messages: self.messages,
            power,
            horizon,
            dark_current: self.dark_current,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
    /// Target at or above `(M-1)/M`: the silent encoder with a constant guess.
    Trivial,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::MonteCarlo => "monte-carlo",
            Method::Trivial => "trivial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub power: f64,
    pub horizon: f64,
    pub p_err_avg: f64,
    pub energy_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub closed_form: Option<PerfReport>,
    pub p_err: Estimate,
    pub energy: Estimate,
    /// Monte Carlo and closed form agree within [`CHECK_SIGMAS`] standard
    /// errors (always true without a closed form).
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierResult {
    pub query: FrontierQuery,
    pub method: Method,
    pub point: Option<OperatingPoint>,
    pub certificate: Option<Certificate>,
    pub converse_floor: f64,
    pub epsilon_floor: f64,
    /// The reported energy respects `epsilon_floor` up to [`CHECK_SIGMAS`]
    /// standard errors.
    pub floor_ok: bool,
}

impl FrontierResult {
    pub fn feasible(&self) -> bool {
        self.point.is_some()
    }
}

struct Plan {
    power_points: usize,
    golden_iters: usize,
    bisect_iters: usize,
    refine_iters: usize,
}

const CLOSED_FORM_PLAN: Plan = Plan {
    power_points: 41,
    golden_iters: 80,
    bisect_iters: 200,
    refine_iters: 60,
};

const MONTE_CARLO_PLAN: Plan = Plan {
    power_points: 6,
    golden_iters: 14,
    bisect_iters: 14,
    refine_iters: 0,
};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n < 2 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| if i == n - 1 { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() })
        .collect()
}

/// Minimize `f` over `[a, b]` by golden section, also considering the
/// endpoints. Returns `(argmin, min)`.
fn golden_min<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, iters: usize) -> Result<(f64, f64)> {
    let mut best = (a, f(a)?);
    let fb = f(b)?;
    if fb < best.1 {
        best = (b, fb);
    }
    if a == b {
        return Ok(best);
    }
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Cheapest feasible horizon for one power, or `None`.
fn best_for_power<E>(eval: &mut E, q: &FrontierQuery, power: f64, plan: &Plan) -> Result<Option<OperatingPoint>>
where
    E: FnMut(f64, f64) -> Result<(f64, f64)>,
{
    let (h_lo, h_hi) = (q.horizon_range.0.ln(), q.horizon_range.1.ln());
    let (arg, p_min) = golden_min(|lh| Ok(eval(power, lh.exp())?.0), h_lo, h_hi, plan.golden_iters)?;
    if p_min > q.epsilon {
        return Ok(None);
    }
    let lh = if eval(power, h_lo.exp())?.0 <= q.epsilon {
        h_lo
    } else {
        let (mut bad, mut good) = (h_lo, arg);
        for _ in 0..plan.bisect_iters {
            let mid = 0.5 * (bad + good);
            if mid == bad || mid == good {
                break;
            }
            if eval(power, mid.exp())?.0 <= q.epsilon {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let horizon = lh.exp().clamp(q.horizon_range.0, q.horizon_range.1);
    let (p, e) = eval(power, horizon)?;
    Ok((p <= q.epsilon).then_some(OperatingPoint {
        power,
        horizon,
        p_err_avg: p,
        energy_avg: e,
    }))
}

fn search<E>(mut eval: E, q: &FrontierQuery, plan: &Plan) -> Result<Option<OperatingPoint>>
where
    E: FnMut(f64, f64) -> Result<(f64, f64)>,
{
    let grid = log_grid(q.power_range.0, q.power_range.1, plan.power_points);
    let mut best: Option<(usize, OperatingPoint)> = None;
    for (i, &a) in grid.iter().enumerate() {
        if let Some(pt) = best_for_power(&mut eval, q, a, plan)? {
            if best.is_none_or(|(_, b)| pt.energy_avg < b.energy_avg) {
                best = Some((i, pt));
            }
        }
    }
    let Some((i, mut pt)) = best else {
        return Ok(None);
    };
    if plan.refine_iters > 0 && grid.len() > 1 {
        let lo = grid[i.saturating_sub(1)].ln();
        let hi = grid[(i + 1).min(grid.len() - 1)].ln();
        let mut cost = |la: f64| -> Result<f64> {
            Ok(best_for_power(&mut eval, q, la.exp(), plan)?.map_or(f64::INFINITY, |p| p.energy_avg))
        };
        let (la, _) = golden_min(&mut cost, lo, hi, plan.refine_iters)?;
        if let Some(r) = best_for_power(&mut eval, q, la.exp(), plan)? {
            if r.energy_avg < pt.energy_avg {
                pt = r;
            }
        }
    }
    Ok(Some(pt))
}

fn closed_form_of(q: &FrontierQuery, power: f64, horizon: f64) -> Result<Option<PerfReport>> {
    Ok(Scheme::from_spec(q.spec(power, horizon))?.closed_form())
}

fn monte_carlo(q: &FrontierQuery, power: f64, horizon: f64, n: u64) -> Result<(Estimate, Estimate)> {
    let scheme = Scheme::from_spec(q.spec(power, horizon))?;
    let stats = simulate_all(&scheme, n, q.seed)?;
    let p: Vec<Estimate> = stats.iter().map(|s| s.p_err(DEFAULT_LEVEL)).collect::<Result<_>>()?;
    let e: Vec<Estimate> = stats.iter().map(|s| s.energy(DEFAULT_LEVEL)).collect::<Result<_>>()?;
    Ok((
        crate::analytics::average_of(&p, DEFAULT_LEVEL)?,
        crate::analytics::average_of(&e, DEFAULT_LEVEL)?,
    ))
}

/// Standard error of an average of per-message proportions if the closed form
/// were the truth.
fn null_stderr(cf: &[f64], n: u64) -> f64 {
    let k = cf.len() as f64;
    cf.iter().map(|p| p * (1.0 - p) / n as f64).sum::<f64>().sqrt() / k
}

pub fn frontier(q: &FrontierQuery) -> Result<FrontierResult> {
    q.validate()?;
    let converse_floor = converse_energy_bound(q.messages)?;
    let epsilon_floor = energy_floor_at_error(q.messages, q.epsilon)?;

    if q.epsilon >= converse_floor {
        return Ok(FrontierResult {
            query: q.clone(),
            method: Method::Trivial,
            point: Some(OperatingPoint {
                power: 0.0,
                horizon: 0.0,
                p_err_avg: converse_floor,
                energy_avg: 0.0,
            }),
            certificate: None,
            converse_floor,
            epsilon_floor,
            floor_ok: true,
        });
    }

    let has_closed_form = closed_form_of(q, q.power_range.0, q.horizon_range.0)?.is_some();
    let (method, point) = if has_closed_form {
        let eval = |a: f64, h: f64| -> Result<(f64, f64)> {
            let r = closed_form_of(q, a, h)?.ok_or_else(|| Error::NoClosedForm(q.kind().to_string()))?;
            Ok((r.p_err_avg, r.energy_avg))
        };
        (Method::ClosedForm, search(eval, q, &CLOSED_FORM_PLAN)?)
    } else {
        let eval = |a: f64, h: f64| -> Result<(f64, f64)> {
            let (p, e) = monte_carlo(q, a, h, q.probe_trials)?;
            Ok((p.mean, e.mean))
        };
        (Method::MonteCarlo, search(eval, q, &MONTE_CARLO_PLAN)?)
    };

    let Some(point) = point else {
        return Ok(FrontierResult {
            query: q.clone(),
            method,
            point: None,
            certificate: None,
            converse_floor,
            epsilon_floor,
            floor_ok: true,
        });
    };

    let (p_mc, e_mc) = monte_carlo(q, point.power, point.horizon, q.trials)?;
    let closed_form = closed_form_of(q, point.power, point.horizon)?;
    let consistent = closed_form.as_ref().is_none_or(|cf| {
        let p_tol = CHECK_SIGMAS * p_mc.stderr.max(null_stderr(&cf.p_err_given, q.trials));
        (p_mc.mean - cf.p_err_avg).abs() <= p_tol
            && (e_mc.mean - cf.energy_avg).abs() <= CHECK_SIGMAS * e_mc.stderr
    });
    let search_se = if method == Method::ClosedForm { 0.0 } else { e_mc.stderr };
    let floor_ok = point.energy_avg >= epsilon_floor - CHECK_SIGMAS * search_se - 1e-12
        && e_mc.mean >= epsilon_floor - CHECK_SIGMAS * e_mc.stderr;

    Ok(FrontierResult {
        query: q.clone(),
        method,
        point: Some(point),
        certificate: Some(Certificate {
            closed_form,
            p_err: p_mc,
            energy: e_mc,
            consistent,
        }),
        converse_floor,
        epsilon_floor,
        floor_ok,
    })
}

/// Flat view of a [`FrontierResult`] for CSV/JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierRow {
    #[serde(rename = "M")]
    pub messages: usize,
    pub dark_current: f64,
    pub epsilon: f64,
    pub feasible: bool,
    pub kind: String,
    pub method: String,
    #[serde(rename = "A")]
    pub power: Option<f64>,
    pub horizon: Option<f64>,
    pub p_err_avg: Option<f64>,
    pub energy_avg: Option<f64>,
    pub mc_p_err: Option<f64>,
    pub mc_p_err_lo: Option<f64>,
    pub mc_p_err_hi: Option<f64>,
    pub mc_energy: Option<f64>,
    pub mc_energy_lo: Option<f64>,
    pub mc_energy_hi: Option<f64>,
    pub mc_energy_stderr: Option<f64>,
    pub certified: Option<bool>,
    pub converse_floor: f64,
    pub epsilon_floor: f64,
    pub floor_ok: bool,
    pub n_trials: u64,
    pub seed: u64,
}

pub const FRONTIER_HEADER: [&str; 23] = [
    "M",
    "dark_current",
    "epsilon",
    "feasible",
    "kind",
    "method",
    "A",
    "horizon",
    "p_err_avg",
    "energy_avg",
    "mc_p_err",
    "mc_p_err_lo",
    "mc_p_err_hi",
    "mc_energy",
    "mc_energy_lo",
    "mc_energy_hi",
    "mc_energy_stderr",
    "certified",
    "converse_floor",
    "epsilon_floor",
    "floor_ok",
    "n_trials",
    "seed",
];

impl From<&FrontierResult> for FrontierRow {
    fn from(r: &FrontierResult) -> Self {
        let q = &r.query;
        let trivial = r.method == Method::Trivial;
        let pt = r.point.as_ref();
        let cert = r.certificate.as_ref();
        FrontierRow {
            messages: q.messages,
            dark_current: q.dark_current,
            epsilon: q.epsilon,
            feasible: r.feasible(),
            kind: if trivial { "silent".to_owned() } else { q.kind().to_string() },
            method: r.method.as_str().to_owned(),
            power: pt.filter(|_| !trivial).map(|p| p.power),
            horizon: pt.filter(|_| !trivial).map(|p| p.horizon),
            p_err_avg: pt.map(|p| p.p_err_avg),
            energy_avg: pt.map(|p| p.energy_avg),
            mc_p_err: cert.map(|c| c.p_err.mean),
            mc_p_err_lo: cert.map(|c| c.p_err.ci_low),
            mc_p_err_hi: cert.map(|c| c.p_err.ci_high),
            mc_energy: cert.map(|c| c.energy.mean),
            mc_energy_lo: cert.map(|c| c.energy.ci_low),
            mc_energy_hi: cert.map(|c| c.energy.ci_high),
            mc_energy_stderr: cert.map(|c| c.energy.stderr),
            certified: cert.map(|c| c.consistent),
            converse_floor: r.converse_floor,
            epsilon_floor: r.epsilon_floor,
            floor_ok: r.floor_ok,
            n_trials: q.trials,
            seed: q.seed,
        }
    }
}

impl Record for FrontierRow {
    fn header() -> &'static [&'static str] {
        &FRONTIER_HEADER
    }

    fn csv_fields(&self) -> Vec<String> {
        let o = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        vec![
            self.messages.to_string(),
            fmt_f64(self.dark_current),
            fmt_f64(self.epsilon),
            self.feasible.to_string(),
            self.kind.clone(),
            self.method.clone(),
            o(self.power),
            o(self.horizon),
            o(self.p_err_avg),
            o(self.energy_avg),
            o(self.mc_p_err),
            o(self.mc_p_err_lo),
            o(self.mc_p_err_hi),
            o(self.mc_energy),
            o(self.mc_energy_lo),
            o(self.mc_energy_hi),
            o(self.mc_energy_stderr),
            self.certified.map(|c| c.to_string()).unwrap_or_default(),
            fmt_f64(self.converse_floor),
            fmt_f64(self.epsilon_floor),
            self.floor_ok.to_string(),
            self.n_trials.to_string(),
            self.seed.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(epsilon: f64, messages: usize, dark: f64) -> FrontierQuery {
        FrontierQuery {
            epsilon,
            messages,
            dark_current: dark,
            power_range: DEFAULT_POWER_RANGE,
            horizon_range: DEFAULT_HORIZON_RANGE,
            probe_trials: 2_000,
            trials: 20_000,
            seed: 0,
        }
    }

    #[test]
    fn golden_finds_interior_minimum() {
        let (x, fx) = golden_min(|x| Ok((x - 0.3) * (x - 0.3)), -1.0, 2.0, 80).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-15);
        let (x, _) = golden_min(|x| Ok(-x), 0.0, 1.0, 40).unwrap();
        assert_eq!(x, 1.0);
    }

    #[test]
    fn binary_zero_dark_inverts_closed_form() {
        let r = frontier(&query(0.01, 2, 0.0)).unwrap();
        let pt = r.point.unwrap();
        assert_eq!(r.method, Method::ClosedForm);
        assert!((pt.energy_avg - 0.49).abs() < 1e-9, "{pt:?}");
        assert!(((-pt.power * pt.horizon).exp() - 0.02).abs() < 1e-9);
        assert!(pt.p_err_avg <= 0.01);
        assert!(r.floor_ok);
        assert!(r.certificate.unwrap().consistent);
    }

    #[test]
    fn degenerate_target_is_free() {
        let r = frontier(&query(0.5, 2, 0.0)).unwrap();
        assert_eq!(r.method, Method::Trivial);
        assert_eq!(r.point.unwrap().energy_avg, 0.0);
        let r = frontier(&query(0.8, 4, 1.0)).unwrap();
        assert_eq!(r.point.unwrap().energy_avg, 0.0);
    }

    #[test]
    fn infeasible_range_is_reported() {
        let mut q = query(1e-6, 2, 1.0);
        q.power_range = (1.0, 2.0);
        let r = frontier(&q).unwrap();
        assert!(!r.feasible());
        assert!(r.certificate.is_none());
        let row = FrontierRow::from(&r);
        assert!(!row.feasible);
        assert_eq!(row.energy_avg, None);
    }

    #[test]
    fn query_validation() {
        assert!(frontier(&query(0.0, 2, 0.0)).is_err());
        assert!(frontier(&query(1.0, 2, 0.0)).is_err());
        let mut q = query(0.1, 2, 0.0);
        q.horizon_range = (2.0, 1.0);
        assert!(frontier(&q).is_err());
    }

    #[test]
    fn mary_zero_dark_matches_closed_form_inverse() {
        // energy = (M-1)/M - epsilon on the boundary
        let r = frontier(&query(0.05, 4, 0.0)).unwrap();
        assert!((r.point.unwrap().energy_avg - 0.70).abs() < 1e-9);
    }

    #[test]
    fn mary_dark_uses_monte_carlo() {
        let mut q = query(0.1, 3, 1.0);
        q.power_range = (100.0, 1e4);
        q.horizon_range = (1e-4, 0.5);
        let r = frontier(&q).unwrap();
        assert_eq!(r.method, Method::MonteCarlo);
        let pt = r.point.unwrap();
        assert!(pt.energy_avg > 0.4 && pt.energy_avg < 0.667, "{pt:?}");
        assert!(r.floor_ok);
    }
}
