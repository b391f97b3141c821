//! `verify`: self-checks of the simulator against identities that must hold
//! for every predictable policy, against closed forms, and against the
//! Poisson law.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{
    chi_square_gof, Estimate, MeanAccumulator, CHECK_SIGMAS, DEFAULT_LEVEL,
};
use crate::channel::{
    verify_intensity_identity, walk_path, ChannelParams, ConstantWeight, EncoderPolicy, IdentityReport,
    MessageId, UntilFirstCount, WeightProcess,
};
use crate::cli::report::{fmt_f64, Record};
use crate::error::{Error, Result};
use crate::fuzz::{identity_case, stop_policy};
use crate::montecarlo::{map_chunks, simulate_message, MessageStats};
use crate::process::{poisson_pmf, sample_homogeneous, sample_next_event, RateSegment, Timeline};
use crate::rng::{RandomSource, SimRng};
use crate::schemes::{default_dark_power, Scheme, SchemeKind, SchemeSpec};

pub const DEFAULT_VERIFY_TRIALS: u64 = 100_000;
pub const DEFAULT_POLICIES: u64 = 50;
/// Significance level of the chi-square checks.
pub const CHI_SQUARE_ALPHA: f64 = 0.001;
/// Largest accepted two-sample Kolmogorov-Smirnov distance.
pub const KS_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Identity,
    Converse,
    Oracle,
    Substrate,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Identity, Suite::Converse, Suite::Oracle, Suite::Substrate];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Converse => "converse",
            Suite::Oracle => "oracle",
            Suite::Substrate => "substrate",
        }
    }

    fn listing() -> String {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.as_str()).collect();
        format!("{} or all", names.join(", "))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim())
            .ok_or_else(|| Error::config("verify.suites", format!("unknown suite {s:?}; available: {}", Suite::listing())))
    }
}

/// Expand a selector list (`all` allowed) into a sorted, deduplicated set.
pub fn parse_suites<S: AsRef<str>>(names: &[S]) -> Result<Vec<Suite>> {
    if names.is_empty() {
        return Err(Error::config(
            "verify.suites",
            format!("no suite selected; available: {}", Suite::listing()),
        ));
    }
    let mut out = Vec::new();
    for n in names {
        let n = n.as_ref();
        if n.trim() == "all" {
            out.extend(Suite::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub suites: Vec<Suite>,
    pub trials: u64,
    pub seed: u64,
    /// Fuzzed policies per fuzzing check.
    pub policies: u64,
}

/// One check: `lhs` against `rhs`, passing when the stated criterion holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub suite: String,
    pub check: String,
    pub lhs: f64,
    pub lhs_lo: Option<f64>,
    pub lhs_hi: Option<f64>,
    pub rhs: f64,
    pub rhs_lo: Option<f64>,
    pub rhs_hi: Option<f64>,
    pub stderr: Option<f64>,
    pub pass: bool,
    pub note: String,
}

pub const VERIFY_HEADER: [&str; 11] = [
    "suite", "check", "lhs", "lhs_lo", "lhs_hi", "rhs", "rhs_lo", "rhs_hi", "stderr", "pass", "note",
];

impl Record for VerifyRow {
    fn header() -> &'static [&'static str] {
        &VERIFY_HEADER
    }

    fn csv_fields(&self) -> Vec<String> {
        let o = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        vec![
            self.suite.clone(),
            self.check.clone(),
            fmt_f64(self.lhs),
            o(self.lhs_lo),
            o(self.lhs_hi),
            fmt_f64(self.rhs),
            o(self.rhs_lo),
            o(self.rhs_hi),
            o(self.stderr),
            self.pass.to_string(),
            self.note.clone(),
        ]
    }
}

impl VerifyRow {
    fn paired(suite: Suite, check: String, lhs: &Estimate, rhs: &Estimate, diff_se: f64, note: String) -> Self {
        VerifyRow {
            suite: suite.to_string(),
            check,
            lhs: lhs.mean,
            lhs_lo: Some(lhs.ci_low),
            lhs_hi: Some(lhs.ci_high),
            rhs: rhs.mean,
            rhs_lo: Some(rhs.ci_low),
            rhs_hi: Some(rhs.ci_high),
            stderr: Some(diff_se),
            pass: within(lhs.mean, rhs.mean, diff_se),
            note,
        }
    }

    fn against_exact(suite: Suite, check: String, lhs: &Estimate, exact: f64, se: f64, note: String) -> Self {
        VerifyRow {
            suite: suite.to_string(),
            check,
            lhs: lhs.mean,
            lhs_lo: Some(lhs.ci_low),
            lhs_hi: Some(lhs.ci_high),
            rhs: exact,
            rhs_lo: None,
            rhs_hi: None,
            stderr: Some(se),
            pass: within(lhs.mean, exact, se),
            note,
        }
    }
}

/// `|a - b| <= CHECK_SIGMAS * se`, with a rounding allowance for exact
/// agreement of deterministic quantities.
fn within(a: f64, b: f64, se: f64) -> bool {
    (a - b).abs() <= CHECK_SIGMAS * se + 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn run_verify(opts: &VerifyOptions) -> Result<Vec<VerifyRow>> {
    if opts.suites.is_empty() {
        return Err(Error::config(
            "verify.suites",
            format!("no suite selected; available: {}", Suite::listing()),
        ));
    }
    if opts.trials < 2 {
        return Err(Error::config("run.trials", "verify needs at least 2 trials"));
    }
    let mut rows = Vec::new();
    for &suite in &opts.suites {
        match suite {
            Suite::Identity => identity_suite(opts, &mut rows)?,
            Suite::Converse => converse_suite(opts, &mut rows)?,
            Suite::Oracle => oracle_suite(opts, &mut rows)?,
            Suite::Substrate => substrate_suite(opts, &mut rows)?,
        }
    }
    Ok(rows)
}

pub fn all_pass(rows: &[VerifyRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

fn identity_row(check: String, r: &IdentityReport, note: String) -> VerifyRow {
    VerifyRow::paired(Suite::Identity, check, &r.lhs, &r.rhs, r.diff.stderr, note)
}

struct ConstantRate(f64);

impl EncoderPolicy for ConstantRate {
    fn query(&self, _: MessageId, _: f64, _: &Timeline, _: &mut SimRng) -> RateSegment {
        RateSegment::new(self.0, f64::INFINITY)
    }
}

fn identity_suite(opts: &VerifyOptions, rows: &mut Vec<VerifyRow>) -> Result<()> {
    let n = opts.trials;
    let dark = ChannelParams::with_dark_current(0.5)?;
    // C(t) = 1{t <= T1 ^ T} on message 1 of the binary scheme
    let binary = crate::schemes::make_binary(1.0, 3.0)?;
    let fixed: [(&str, &dyn EncoderPolicy, &dyn WeightProcess, ChannelParams, f64); 3] = [
        ("constant-rate", &ConstantRate(1.5), &ConstantWeight(1.0), dark, 2.0),
        ("zero-weight", &ConstantRate(1.5), &ConstantWeight(0.0), dark, 2.0),
        ("first-count-indicator", &binary, &UntilFirstCount, ChannelParams::noiseless(), 3.0),
    ];
    for (name, policy, weight, params, horizon) in fixed {
        let r = verify_intensity_identity(policy, weight, 1, &params, horizon, n, opts.seed)?;
        rows.push(identity_row(
            name.to_owned(),
            &r,
            format!("dark_current={} horizon={horizon}", params.dark_current),
        ));
    }
    for i in 0..opts.policies {
        let case = identity_case(opts.seed, i);
        let r = verify_intensity_identity(
            &case.policy,
            &case.weight,
            1,
            &case.params,
            case.horizon,
            n,
            opts.seed,
        )?;
        let weight = match &case.weight {
            crate::fuzz::FuzzWeight::UntilFirstCount => "first-count-indicator".to_owned(),
            crate::fuzz::FuzzWeight::Reactive { reaction, .. } => format!("reactive {reaction:?}"),
        };
        rows.push(identity_row(
            format!("fuzz-{i}"),
            &r,
            format!(
                "policy {:?} stop={} weight {weight} dark_current={} horizon={}",
                case.policy.reaction, case.policy.stop_at_first_count, case.params.dark_current, case.horizon
            ),
        ));
    }
    Ok(())
}

/// Per-path `1{correct} - energy` for a policy on message 1 of a noiseless
/// channel whose decoder declares 1 on any count.
fn stop_policy_converse(policy: &dyn EncoderPolicy, horizon: f64, n: u64, seed: u64) -> Result<[MeanAccumulator; 3]> {
    let params = ChannelParams::noiseless();
    let chunks = map_chunks(n, |range| {
        let mut acc = [MeanAccumulator::default(); 3];
        for i in range {
            let path = walk_path(policy, None, 1, &params, horizon, RandomSource::for_trial(seed, 1, i))?;
            let correct = f64::from(u8::from(!path.timeline.is_empty()));
            acc[0].push(correct);
            acc[1].push(path.energy);
            acc[2].push(correct - path.energy);
        }
        Ok(acc)
    })?;
    let mut total = [MeanAccumulator::default(); 3];
    for c in &chunks {
        for (t, x) in total.iter_mut().zip(c) {
            t.merge(x);
        }
    }
    Ok(total)
}

pub const CONVERSE_POWERS: [f64; 3] = [1.0, 10.0, 100.0];
pub const CONVERSE_HORIZONS: [f64; 3] = [0.1, 1.0, 3.0];

fn converse_suite(opts: &VerifyOptions, rows: &mut Vec<VerifyRow>) -> Result<()> {
    for a in CONVERSE_POWERS {
        for t in CONVERSE_HORIZONS {
            let scheme = crate::schemes::make_binary(a, t)?;
            let st = simulate_message(&scheme, 1, opts.trials, opts.seed)?;
            let p_correct = crate::analytics::estimate_bernoulli_at(st.trials - st.errors, st.trials, DEFAULT_LEVEL)?;
            let energy = st.energy(DEFAULT_LEVEL)?;
            rows.push(VerifyRow::paired(
                Suite::Converse,
                format!("binary A={a} T={t}"),
                &p_correct,
                &energy,
                st.correct_minus_energy.stderr(),
                "1 - p_err|1 vs energy|1".to_owned(),
            ));
        }
    }
    for i in 0..opts.policies {
        let (policy, horizon) = stop_policy(opts.seed, i);
        let [correct, energy, diff] = stop_policy_converse(&policy, horizon, opts.trials, opts.seed)?;
        rows.push(VerifyRow::paired(
            Suite::Converse,
            format!("stop-policy-{i}"),
            &correct.estimate_at(DEFAULT_LEVEL)?,
            &energy.estimate_at(DEFAULT_LEVEL)?,
            diff.stderr(),
            format!("policy {:?} horizon={horizon}", policy.reaction),
        ));
    }
    Ok(())
}

pub const ORACLE_POWERS: [f64; 3] = [1.0, 10.0, 100.0];
pub const ORACLE_HORIZONS: [f64; 3] = [0.1, 1.0, 3.0];
pub const ORACLE_DARK: [f64; 3] = [0.5, 1.0, 2.0];
pub const ORACLE_WINDOWS: [f64; 3] = [0.001, 0.01, 0.1];
pub const ORACLE_MARY_MESSAGES: usize = 4;

fn oracle_specs() -> Vec<SchemeSpec> {
    let mut specs = Vec::new();
    for (kind, messages) in [(SchemeKind::BinaryZeroDark, 2), (SchemeKind::MaryZeroDark, ORACLE_MARY_MESSAGES)] {
        for power in ORACLE_POWERS {
            for horizon in ORACLE_HORIZONS {
                specs.push(SchemeSpec {
                    kind,
                    messages,
                    power,
                    horizon,
                    dark_current: 0.0,
                });
            }
        }
    }
    for (kind, messages) in [(SchemeKind::BinaryDarkWindow, 2), (SchemeKind::MaryDarkWindow, ORACLE_MARY_MESSAGES)] {
        for dark in ORACLE_DARK {
            for horizon in ORACLE_WINDOWS {
                specs.push(SchemeSpec {
                    kind,
                    messages,
                    power: default_dark_power(dark),
                    horizon,
                    dark_current: dark,
                });
            }
        }
    }
    specs
}

fn spec_label(s: &SchemeSpec) -> String {
    format!("{} M={} A={} T={} dark={}", s.kind, s.messages, s.power, s.horizon, s.dark_current)
}

fn oracle_suite(opts: &VerifyOptions, rows: &mut Vec<VerifyRow>) -> Result<()> {
    let n = opts.trials;
    for spec in oracle_specs() {
        let scheme = Scheme::from_spec(spec)?;
        let stats: Vec<MessageStats> = (0..spec.messages)
            .map(|m| simulate_message(&scheme, m, n, opts.seed))
            .collect::<Result<_>>()?;
        let label = spec_label(&spec);
        match scheme.closed_form() {
            Some(cf) => {
                for st in &stats {
                    let m = st.message;
                    let p = st.p_err(DEFAULT_LEVEL)?;
                    let q = cf.p_err_given[m];
                    // null-hypothesis stderr keeps the check meaningful when
                    // no errors are observed
                    let se = p.stderr.max((q * (1.0 - q) / n as f64).sqrt());
                    rows.push(VerifyRow::against_exact(
                        Suite::Oracle,
                        format!("{label} message={m} p_err"),
                        &p,
                        q,
                        se,
                        "closed form".to_owned(),
                    ));
                    let e = st.energy(DEFAULT_LEVEL)?;
                    rows.push(VerifyRow::against_exact(
                        Suite::Oracle,
                        format!("{label} message={m} energy"),
                        &e,
                        cf.energy_given[m],
                        e.stderr,
                        "closed form".to_owned(),
                    ));
                }
            }
            None => {
                let parts: Vec<Estimate> = stats.iter().map(|s| s.p_err(DEFAULT_LEVEL)).collect::<Result<_>>()?;
                let avg = crate::analytics::average_of(&parts, DEFAULT_LEVEL)?;
                let bound = crate::analytics::mary_dark_error_bound(spec.messages, spec.power, spec.horizon, spec.dark_current)?;
                rows.push(VerifyRow {
                    suite: Suite::Oracle.to_string(),
                    check: format!("{label} p_err_avg bound"),
                    lhs: avg.mean,
                    lhs_lo: Some(avg.ci_low),
                    lhs_hi: Some(avg.ci_high),
                    rhs: bound,
                    rhs_lo: None,
                    rhs_hi: None,
                    stderr: Some(avg.stderr),
                    pass: avg.mean <= bound + CHECK_SIGMAS * avg.stderr,
                    note: "union bound, one-sided".to_owned(),
                });
            }
        }
    }
    Ok(())
}

pub const CHI_SQUARE_CASES: [(f64, f64); 3] = [(1.0, 1.0), (2.0, 10.0), (0.1, 5.0)];
pub const FIRST_COUNT_RATE: f64 = 2.0;

/// Counts of a homogeneous process on `[0, horizon]` over `n` trials.
pub fn count_histogram(rate: f64, horizon: f64, n: u64, seed: u64) -> Result<Vec<u64>> {
    let chunks = map_chunks(n, |range| {
        let mut h: Vec<u64> = Vec::new();
        for i in range {
            let mut rng = RandomSource::for_trial(seed, 0, i).channel_rng();
            let k = sample_homogeneous(rate, horizon, &mut rng)?.len();
            if h.len() <= k {
                h.resize(k + 1, 0);
            }
            h[k] += 1;
        }
        Ok(h)
    })?;
    let mut total: Vec<u64> = Vec::new();
    for c in chunks {
        if total.len() < c.len() {
            total.resize(c.len(), 0);
        }
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    Ok(total)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// First-event times at `rate`, sampled once from 0 and, independently, in two
/// stages restarted at `split`.
pub fn memoryless_samples(rate: f64, split: f64, n: u64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let chunks = map_chunks(n, |range| {
        let mut one = Vec::with_capacity((range.end - range.start) as usize);
        let mut two = Vec::with_capacity((range.end - range.start) as usize);
        for i in range {
            let mut rng = RandomSource::for_trial(seed, 2, i).channel_rng();
            let t = sample_next_event(0.0, RateSegment::new(rate, f64::INFINITY), &mut rng)?;
            one.push(t.unwrap_or(f64::INFINITY));
            let mut rng = RandomSource::for_trial(seed, 3, i).channel_rng();
            let t = match sample_next_event(0.0, RateSegment::new(rate, split), &mut rng)? {
                Some(t) => Some(t),
                None => sample_next_event(split, RateSegment::new(rate, f64::INFINITY), &mut rng)?,
            };
            two.push(t.unwrap_or(f64::INFINITY));
        }
        Ok((one, two))
    })?;
    let (mut one, mut two) = (Vec::new(), Vec::new());
    for (a, b) in chunks {
        one.extend(a);
        two.extend(b);
    }
    Ok((one, two))
}

fn substrate_suite(opts: &VerifyOptions, rows: &mut Vec<VerifyRow>) -> Result<()> {
    let n = opts.trials;
    for (rate, horizon) in CHI_SQUARE_CASES {
        let hist = count_histogram(rate, horizon, n, opts.seed)?;
        let t = chi_square_gof(&hist, |k| poisson_pmf(rate * horizon, k))?;
        rows.push(VerifyRow {
            suite: Suite::Substrate.to_string(),
            check: format!("poisson counts rate={rate} T={horizon}"),
            lhs: t.p_value,
            lhs_lo: None,
            lhs_hi: None,
            rhs: CHI_SQUARE_ALPHA,
            rhs_lo: None,
            rhs_hi: None,
            stderr: None,
            pass: t.p_value >= CHI_SQUARE_ALPHA,
            note: format!("chi-square p-value; statistic={} dof={}", fmt_f64(t.statistic), t.dof),
        });
    }

    let (mut one, mut two) = memoryless_samples(FIRST_COUNT_RATE, 0.3, n, opts.seed)?;
    let mut first = MeanAccumulator::default();
    one.iter().for_each(|&t| first.push(t));
    let est = first.estimate_at(DEFAULT_LEVEL)?;
    rows.push(VerifyRow::against_exact(
        Suite::Substrate,
        format!("first count mean rate={FIRST_COUNT_RATE}"),
        &est,
        1.0 / FIRST_COUNT_RATE,
        est.stderr,
        "exponential mean".to_owned(),
    ));
    let d = ks_distance(&mut one, &mut two);
    rows.push(VerifyRow {
        suite: Suite::Substrate.to_string(),
        check: format!("memoryless restart rate={FIRST_COUNT_RATE}"),
        lhs: d,
        lhs_lo: None,
        lhs_hi: None,
        rhs: KS_LIMIT,
        rhs_lo: None,
        rhs_hi: None,
        stderr: None,
        pass: d < KS_LIMIT,
        note: "two-sample KS distance, one stage vs restarted at 0.3".to_owned(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(suite: Suite, trials: u64, policies: u64) -> VerifyOptions {
        VerifyOptions {
            suites: vec![suite],
            trials,
            seed: 0,
            policies,
        }
    }

    #[test]
    fn suite_selection() {
        assert_eq!(parse_suites(&["all"]).unwrap(), Suite::ALL.to_vec());
        assert_eq!(parse_suites(&["oracle", "identity", "oracle"]).unwrap(), vec![Suite::Identity, Suite::Oracle]);
        let err = parse_suites::<&str>(&[]).unwrap_err();
        assert!(err.to_string().contains("identity, converse, oracle, substrate"), "{err}");
        assert_eq!(err.exit_code(), 1);
        assert!(parse_suites(&["nope"]).is_err());
        assert!(run_verify(&VerifyOptions {
            suites: vec![],
            trials: 10,
            seed: 0,
            policies: 0
        })
        .is_err());
    }

    #[test]
    fn ks_distance_basics() {
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&mut a, &mut b), 0.0);
        let mut c = vec![10.0, 11.0];
        assert_eq!(ks_distance(&mut a, &mut c), 1.0);
    }

    #[test]
    fn small_identity_and_converse_runs_pass() {
        let rows = run_verify(&opts(Suite::Identity, 4_000, 5)).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(all_pass(&rows), "{rows:#?}");
        let zero = rows.iter().find(|r| r.check == "zero-weight").unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));

        let rows = run_verify(&opts(Suite::Converse, 4_000, 3)).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(all_pass(&rows), "{rows:#?}");
    }

    #[test]
    fn substrate_rows() {
        let rows = run_verify(&opts(Suite::Substrate, 20_000, 0)).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(all_pass(&rows), "{rows:#?}");
    }

    #[test]
    fn csv_rows_have_header_width() {
        let row = VerifyRow {
            suite: "x".into(),
            check: "y".into(),
            lhs: 1.0,
            lhs_lo: None,
            lhs_hi: None,
            rhs: 1.0,
            rhs_lo: None,
            rhs_hi: None,
            stderr: Some(0.0),
            pass: true,
            note: String::new(),
        };
        assert_eq!(row.csv_fields().len(), VERIFY_HEADER.len());
    }
}
