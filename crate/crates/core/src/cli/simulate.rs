//! `simulate` and `sweep`.

use std::str::FromStr;

use crate::analytics::{average_of, Estimate, PerfReport, DEFAULT_LEVEL};
use crate::cli::config::ExperimentConfig;
use crate::cli::report::{MessageLabel, ReportRow};
use crate::error::{Error, Result};
use crate::montecarlo::{simulate_message, MessageStats};
use crate::schemes::{Scheme, SchemeSpec};

/// Largest grid `sweep` accepts.
pub const MAX_GRID_POINTS: usize = 10_000;

/// Outcome of one `simulate` run.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub spec: SchemeSpec,
    pub seed: u64,
    pub stats: Vec<MessageStats>,
    pub p_err: Vec<Estimate>,
    pub energy: Vec<Estimate>,
    /// Message-averaged estimates; present when every message was simulated.
    pub p_err_avg: Option<Estimate>,
    pub energy_avg: Option<Estimate>,
    pub closed_form: Option<PerfReport>,
}

impl SimulationReport {
    /// One row per simulated message, followed by the `avg` row when present.
    pub fn rows(&self) -> Vec<ReportRow> {
        let s = &self.spec;
        let base = |message, n_trials, p: &Estimate, e: &Estimate, cf: (Option<f64>, Option<f64>)| ReportRow {
            kind: s.kind,
            messages: s.messages,
            power: s.power,
            horizon: s.horizon,
            dark_current: s.dark_current,
            message,
            n_trials,
            p_err: p.mean,
            p_err_lo: p.ci_low,
            p_err_hi: p.ci_high,
            energy: e.mean,
            energy_lo: e.ci_low,
            energy_hi: e.ci_high,
            cf_p_err: cf.0,
            cf_energy: cf.1,
            seed: self.seed,
        };
        let mut rows: Vec<ReportRow> = self
            .stats
            .iter()
            .zip(self.p_err.iter().zip(&self.energy))
            .map(|(st, (p, e))| {
                let cf = self.closed_form.as_ref().map_or((None, None), |r| {
                    (Some(r.p_err_given[st.message]), Some(r.energy_given[st.message]))
                });
                base(MessageLabel::Single(st.message), st.trials, p, e, cf)
            })
            .collect();
        if let (Some(p), Some(e)) = (&self.p_err_avg, &self.energy_avg) {
            let cf = self
                .closed_form
                .as_ref()
                .map_or((None, None), |r| (Some(r.p_err_avg), Some(r.energy_avg)));
            rows.push(base(MessageLabel::Average, p.n, p, e, cf));
        }
        rows
    }
}

/// Run `config.output.n_trials` transmissions of each selected message.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulationReport> {
    let scheme = Scheme::from_spec(config.scheme)?;
    let seed = config.output.seed;
    let stats = config
        .messages()
        .into_iter()
        .map(|m| simulate_message(&scheme, m, config.output.n_trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let p_err = stats
        .iter()
        .map(|s| s.p_err(DEFAULT_LEVEL))
        .collect::<Result<Vec<_>>>()?;
    let energy = stats
        .iter()
        .map(|s| s.energy(DEFAULT_LEVEL))
        .collect::<Result<Vec<_>>>()?;
    let (p_err_avg, energy_avg) = if config.message.is_none() {
        (Some(average_proportion(&p_err)?), Some(average_of(&energy, DEFAULT_LEVEL)?))
    } else {
        (None, None)
    };
    Ok(SimulationReport {
        spec: config.scheme,
        seed,
        stats,
        p_err,
        energy,
        p_err_avg,
        energy_avg,
        closed_form: scheme.closed_form(),
    })
}

/// Average of per-message error estimates. The interval is the average of the
/// per-message Wilson bounds, which stays inside `[0, 1]` and keeps its width
/// where the normal approximation degenerates (no observed errors).
fn average_proportion(parts: &[Estimate]) -> Result<Estimate> {
    let mut avg = average_of(parts, DEFAULT_LEVEL)?;
    let k = parts.len() as f64;
    avg.ci_low = parts.iter().map(|e| e.ci_low).sum::<f64>() / k;
    avg.ci_high = parts.iter().map(|e| e.ci_high).sum::<f64>() / k;
    Ok(avg)
}

/// Scheme parameter a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisName {
    Power,
    Horizon,
    DarkCurrent,
    Messages,
}

impl AxisName {
    fn apply(self, spec: &mut SchemeSpec, value: f64) -> Result<()> {
        match self {
            AxisName::Power => spec.power = value,
            AxisName::Horizon => spec.horizon = value,
            AxisName::DarkCurrent => spec.dark_current = value,
            AxisName::Messages => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::config("sweep.axes", format!("M must be an integer >= 2, got {value}")));
                }
                spec.messages = value as usize;
            }
        }
        Ok(())
    }
}

/// One sweep axis: a parameter and its grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

impl FromStr for Axis {
    type Err = Error;

    /// `NAME=v1,v2,...`, `NAME=lin:start:stop:n` or `NAME=log:start:stop:n`,
    /// with `NAME` one of `A`, `horizon`, `dark_current`, `M`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |msg: String| Error::config("sweep.axes", format!("{s:?}: {msg}"));
        let (name, grid) = s.split_once('=').ok_or_else(|| err("expected NAME=VALUES".into()))?;
        let name = match name.trim() {
            "A" => AxisName::Power,
            "horizon" | "T" | "delta" => AxisName::Horizon,
            "dark_current" | "dark-current" => AxisName::DarkCurrent,
            "M" => AxisName::Messages,
            other => return Err(err(format!("unknown axis {other:?}; expected A, horizon, dark_current or M"))),
        };
        let grid = grid.trim();
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| err(format!("bad number {v:?}")));
        let values = if let Some(rest) = grid.strip_prefix("lin:").or_else(|| grid.strip_prefix("log:")) {
            let parts: Vec<&str> = rest.split(':').collect();
            let [start, stop, n] = parts.as_slice() else {
                return Err(err("expected lin:start:stop:n or log:start:stop:n".into()));
            };
            let (start, stop) = (parse(start)?, parse(stop)?);
            let n: usize = n.trim().parse().map_err(|_| err(format!("bad point count {n:?}")))?;
            if n > MAX_GRID_POINTS {
                return Err(err(format!("at most {MAX_GRID_POINTS} points per axis")));
            }
            if grid.starts_with("log:") {
                if !(start > 0.0 && stop > 0.0) {
                    return Err(err("log grid needs positive endpoints".into()));
                }
                let mut v: Vec<f64> = spaced(start.ln(), stop.ln(), n).into_iter().map(f64::exp).collect();
                // endpoints exactly as written
                if let Some(first) = v.first_mut() {
                    *first = start;
                }
                if n > 1 {
                    v[n - 1] = stop;
                }
                v
            } else {
                spaced(start, stop, n)
            }
        } else if grid.is_empty() {
            Vec::new()
        } else {
            grid.split(',').map(parse).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(err("empty grid".into()));
        }
        Ok(Axis { name, values })
    }
}

fn spaced(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Every grid point of a one- or two-axis sweep in row-major order (the first
/// axis varies slowest), validated before anything runs.
pub fn grid_points(base: &SchemeSpec, axes: &[Axis]) -> Result<Vec<SchemeSpec>> {
    match axes {
        [] => return Err(Error::config("sweep.axes", "at least one axis is required")),
        [a, b] if a.name == b.name => {
            return Err(Error::config("sweep.axes", "the two axes must vary different parameters"))
        }
        [_] | [_, _] => {}
        _ => return Err(Error::config("sweep.axes", "at most two axes are supported")),
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    if total == 0 {
        return Err(Error::config("sweep.axes", "empty grid"));
    }
    if total > MAX_GRID_POINTS {
        return Err(Error::config(
            "sweep.axes",
            format!("{total} grid points exceed the limit of {MAX_GRID_POINTS}"),
        ));
    }
    let inner: &[f64] = axes.get(1).map_or(&[f64::NAN], |a| &a.values);
    let mut points = Vec::with_capacity(total);
    for &u in &axes[0].values {
        for &v in inner {
            let mut spec = *base;
            axes[0].name.apply(&mut spec, u)?;
            if let Some(b) = axes.get(1) {
                b.name.apply(&mut spec, v)?;
            }
            spec.validate().map_err(|e| Error::config("sweep.axes", e.to_string()))?;
            points.push(spec);
        }
    }
    Ok(points)
}

/// Simulate every grid point; one row per grid point per message.
pub fn sweep(base: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<ReportRow>> {
    let points = grid_points(&base.scheme, axes)?;
    if let Some(m) = base.message {
        if let Some(p) = points.iter().find(|p| m >= p.messages) {
            return Err(Error::config(
                "scheme.message",
                format!("message {m} out of range for M = {}", p.messages),
            ));
        }
    }
    let mut rows = Vec::new();
    for spec in points {
        let cfg = ExperimentConfig {
            scheme: spec,
            message: base.message,
            output: base.output.clone(),
        };
        let report = simulate(&cfg)?;
        rows.extend(report.rows().into_iter().filter(|r| r.message != MessageLabel::Average));
    }
    Ok(rows)
}
