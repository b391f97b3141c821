//! Acceptance gate: one PASS/FAIL line per criterion, driven through the
//! command-line binary. Exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::process::{Command, ExitCode};

use poisson_lab::analytics::z_for_level;

const BIN: &str = env!("CARGO_BIN_EXE_poisson-lab");
const SIGMAS: f64 = 4.0;
const N: &str = "1000000";

type Row = HashMap<String, String>;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("spawn poisson-lab");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn rows(csv_text: &str) -> Vec<Row> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_owned).collect();
    r.records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(str::to_owned)).collect())
        .collect()
}

fn f(row: &Row, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key}={:?}", row[key]))
}

fn avg_row(rows: &[Row]) -> &Row {
    rows.iter().find(|r| r["message"] == "avg").expect("avg row")
}

/// Standard error recovered from a reported 95% normal interval.
fn se_of(row: &Row, lo: &str, hi: &str) -> f64 {
    (f(row, hi) - f(row, lo)) / (2.0 * z_for_level(0.95).unwrap())
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simulate(kind: &str, m: &str, a: &str, t: &str, seed: &str) -> Result<Run, String> {
    let r = run(&["simulate", "--scheme", kind, "--M", m, "--A", a, "--horizon", t, "--trials", N, "--seed", seed]);
    if r.code != 0 {
        return Err(format!("exit {}: {}", r.code, r.stderr.trim()));
    }
    Ok(r)
}

fn energy_near(row: &Row, target: f64) -> (bool, String) {
    let e = f(row, "energy");
    let se = se_of(row, "energy_lo", "energy_hi");
    (
        (e - target).abs() <= SIGMAS * se,
        format!("energy_avg={e:.6} target={target:.6} |diff|={:.2e} 4se={:.2e}", (e - target).abs(), SIGMAS * se),
    )
}

fn criterion_1() -> Outcome {
    let r = simulate("binary", "2", "10", "5", "0")?;
    let rows = rows(&r.stdout);
    let avg = avg_row(&rows);
    let (ok, detail) = energy_near(avg, -(-50.0f64).exp_m1() / 2.0);
    let p = f(avg, "p_err");
    check(ok && p < 1e-5, format!("{detail} p_err_avg={p:.3e}"))
}

fn criterion_2() -> Outcome {
    let r = run(&["frontier", "--epsilon", "0.02", "--dark-current", "1", "--trials", N]);
    if r.code != 0 {
        return Err(format!("exit {}: {}", r.code, r.stderr.trim()));
    }
    let rows = rows(&r.stdout);
    let row = &rows[0];
    let e = f(row, "energy_avg");
    let mc = f(row, "mc_energy");
    let ok = row["feasible"] == "true"
        && (0.48..=0.51).contains(&e)
        && row["certified"] == "true"
        && row["n_trials"] == N
        && f(row, "p_err_avg") <= 0.02;
    check(
        ok,
        format!(
            "energy_avg={e:.6} at A={} delta={} mc_energy={mc:.6} mc_p_err={:.5} certified={}",
            row["A"], row["horizon"], f(row, "mc_p_err"), row["certified"]
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (m, a, t) in [("4", "100", "3"), ("2", "10", "5"), ("8", "100", "3")] {
        let r = simulate("mary", m, a, t, "0")?;
        let rows = rows(&r.stdout);
        let avg = avg_row(&rows);
        let mm: f64 = m.parse().unwrap();
        let tau = t.parse::<f64>().unwrap() / mm;
        let target = (mm - 1.0) / mm * -(-a.parse::<f64>().unwrap() * tau).exp_m1();
        let (good, d) = energy_near(avg, target);
        ok &= good;
        details.push(format!("M={m}: {d}"));
        if m == "2" {
            // the two-message slot scheme is the one-bit scheme
            let b = simulate("binary", "2", a, t, "0")?;
            let same = rows.iter().zip(self::rows(&b.stdout)).all(|(x, y)| {
                ["p_err", "energy", "energy_lo", "energy_hi"].iter().all(|k| x[*k] == y[*k])
            });
            ok &= same;
            details.push(format!("M=2 identical to binary: {same}"));
        }
    }
    check(ok, details.join("; "))
}

fn criterion_4() -> Outcome {
    let r = run(&[
        "sweep", "--scheme", "binary-dark", "--dark-current", "1", "--A", "10000", "--axis",
        "horizon=0.001,0.01,0.1", "--trials", N,
    ]);
    if r.code != 0 {
        return Err(format!("exit {}: {}", r.code, r.stderr.trim()));
    }
    let mut ok = true;
    let mut details = Vec::new();
    let rows = rows(&r.stdout);
    let zero: Vec<&Row> = rows.iter().filter(|r| r["message"] == "0").collect();
    ok &= zero.len() == 3;
    for row in zero {
        let delta = f(row, "horizon");
        let q = -(-delta).exp_m1();
        let p = f(row, "p_err");
        let se = (q * (1.0 - q) / f(row, "n_trials")).sqrt();
        let good = (p - q).abs() <= SIGMAS * se;
        ok &= good;
        details.push(format!("delta={delta}: p_err|0={p:.6e} vs {q:.6e} ({:.1} se)", (p - q) / se));
    }
    check(ok, details.join("; "))
}

fn verify_suite(suite: &str, expected_rows: usize) -> Outcome {
    let r = run(&["verify", suite, "--trials", "100000", "--policies", "50"]);
    let rows = rows(&r.stdout);
    let failed: Vec<&str> = rows.iter().filter(|r| r["pass"] != "true").map(|r| r["check"].as_str()).collect();
    let worst = rows
        .iter()
        .filter_map(|r| {
            let se: f64 = r["stderr"].parse().ok()?;
            (se > 0.0).then(|| (f(r, "lhs") - f(r, "rhs")).abs() / se)
        })
        .fold(0.0f64, f64::max);
    check(
        r.code == 0 && failed.is_empty() && rows.len() == expected_rows,
        format!(
            "exit {} {} checks, {} failed {:?}, worst |lhs-rhs|/se={worst:.2}",
            r.code,
            rows.len(),
            failed.len(),
            failed
        ),
    )
}

fn criterion_5() -> Outcome {
    // 3x3 binary grid plus 50 fuzzed stop-at-first-count policies
    verify_suite("converse", 9 + 50)
}

fn criterion_6() -> Outcome {
    let r = verify_suite("identity", 3 + 50)?;
    Ok(format!("{r} (includes C(t)=1{{t<=T1^T}})"))
}

fn criterion_7() -> Outcome {
    let r = run(&["verify", "substrate", "--trials", "100000"]);
    let rows = rows(&r.stdout);
    let parts: Vec<String> = rows
        .iter()
        .map(|x| format!("{}: {} ({})", x["check"], x["lhs"], x["pass"]))
        .collect();
    check(r.code == 0 && rows.iter().all(|x| x["pass"] == "true"), parts.join("; "))
}

fn criterion_8() -> Outcome {
    let a = simulate("binary", "2", "10", "5", "0")?;
    let b = simulate("binary", "2", "10", "5", "0")?;
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();

    let mut intervals = Vec::new();
    for seed in 0..10 {
        let r = simulate("binary", "2", "10", "5", &seed.to_string())?;
        let rows = rows(&r.stdout);
        let avg = avg_row(&rows);
        intervals.push((f(avg, "energy_lo"), f(avg, "energy_hi"), f(avg, "p_err_lo"), f(avg, "p_err_hi")));
    }
    let max_lo = intervals.iter().map(|i| i.0).fold(f64::MIN, f64::max);
    let min_hi = intervals.iter().map(|i| i.1).fold(f64::MAX, f64::min);
    let p_overlap = intervals.iter().map(|i| i.2).fold(f64::MIN, f64::max)
        <= intervals.iter().map(|i| i.3).fold(f64::MAX, f64::min);
    check(
        identical && max_lo <= min_hi && p_overlap,
        format!(
            "byte-identical={identical}; 10 seeds energy CIs: max lo={max_lo:.6} min hi={min_hi:.6}; p_err CIs overlap={p_overlap}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("one-bit energy 1/2", criterion_1),
        ("dark current does not raise the floor", criterion_2),
        ("M-ary energy (M-1)/M", criterion_3),
        ("spurious-count probability", criterion_4),
        ("converse identity", criterion_5),
        ("intensity identity", criterion_6),
        ("distributional substrate", criterion_7),
        ("reproducibility", criterion_8),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {}: PASS  {name} [{secs:.1}s] {d}", i + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {}: FAIL  {name} [{secs:.1}s] {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
