use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use poisson_lab::cli::config::{
    ConfigFile, ExperimentConfig, OutputOptions, RunOverrides, SchemeOverrides,
};
use poisson_lab::cli::frontier::{
    frontier, FrontierQuery, FrontierRow, DEFAULT_HORIZON_RANGE, DEFAULT_POWER_RANGE,
    DEFAULT_PROBE_TRIALS,
};
use poisson_lab::cli::report::emit;
use poisson_lab::cli::simulate::{simulate, sweep, Axis};
use poisson_lab::cli::verify::{
    all_pass, parse_suites, run_verify, VerifyOptions, DEFAULT_POLICIES, DEFAULT_VERIFY_TRIALS,
};
use poisson_lab::montecarlo::init_thread_pool;
use poisson_lab::schemes::SchemeKind;
use poisson_lab::{Error, Result};

const EXIT_VERIFY_FAILED: u8 = 3;
/// Frontier found no point meeting the target in the searched ranges.
const EXIT_INFEASIBLE: u8 = 2;

/// Simulate the Poisson channel with dark current and noiseless feedback.
#[derive(Parser, Debug)]
#[command(name = "poisson-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo error probability and energy of one scheme.
    Simulate(SimulateArgs),
    /// Simulate over a one- or two-parameter grid.
    Sweep(SweepArgs),
    /// Least average energy reaching a target error probability.
    Frontier(FrontierArgs),
    /// Run self-check suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn run(&self) -> RunOverrides {
        RunOverrides {
            trials: self.trials,
            seed: self.seed,
            format: self.format.clone(),
            out: self.out.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct SchemeFlags {
    /// binary, binary-dark, mary or mary-dark (or the long names)
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "M")]
    messages: Option<usize>,
    /// Signal power A.
    #[arg(long = "A")]
    power: Option<f64>,
    /// Horizon T, or the window delta for the dark-current kinds.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dark_current: Option<f64>,
    /// Simulate only this message.
    #[arg(long)]
    message: Option<usize>,
}

impl SchemeFlags {
    fn overrides(&self) -> SchemeOverrides {
        SchemeOverrides {
            kind: self.scheme.clone(),
            messages: self.messages,
            power: self.power,
            horizon: self.horizon,
            dark_current: self.dark_current,
            message: self.message,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scheme: SchemeFlags,
    #[command(flatten)]
    common: Common,
    /// NAME=v1,v2,... or NAME=lin:a:b:n or NAME=log:a:b:n; NAME is A,
    /// horizon, dark_current or M. Repeat for a second axis.
    #[arg(long = "axis")]
    axes: Vec<String>,
}

#[derive(Args, Debug)]
struct FrontierArgs {
    #[command(flatten)]
    common: Common,
    /// Target average error probability.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "M")]
    messages: Option<usize>,
    #[arg(long)]
    dark_current: Option<f64>,
    #[arg(long = "A-min")]
    power_min: Option<f64>,
    #[arg(long = "A-max")]
    power_max: Option<f64>,
    #[arg(long)]
    horizon_min: Option<f64>,
    #[arg(long)]
    horizon_max: Option<f64>,
    /// Trials per message for each search probe (kinds without closed form).
    #[arg(long)]
    probe_trials: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// identity, converse, oracle, substrate or all.
    suites: Vec<String>,
    /// Fuzzed policies per fuzzing check.
    #[arg(long)]
    policies: Option<u64>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8> {
    let file = ConfigFile::load_optional(args.common.config.as_deref())?;
    let cfg = ExperimentConfig::resolve(&file, &args.scheme.overrides(), &args.common.run())?;
    let report = simulate(&cfg)?;
    emit(&report.rows(), cfg.output.format, cfg.output.out.as_deref())?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8> {
    let file = ConfigFile::load_optional(args.common.config.as_deref())?;
    let cfg = ExperimentConfig::resolve(&file, &args.scheme.overrides(), &args.common.run())?;
    let specs = if args.axes.is_empty() { &file.sweep.axes } else { &args.axes };
    let axes = specs.iter().map(|s| s.parse()).collect::<Result<Vec<Axis>>>()?;
    let rows = sweep(&cfg, &axes)?;
    emit(&rows, cfg.output.format, cfg.output.out.as_deref())?;
    Ok(0)
}

fn cmd_frontier(args: &FrontierArgs) -> Result<u8> {
    let file = ConfigFile::load_optional(args.common.config.as_deref())?;
    let f = &file.frontier;
    let output = OutputOptions::resolve(&file.run, &args.common.run(), poisson_lab::cli::config::DEFAULT_TRIALS)?;
    let epsilon = args
        .epsilon
        .or(f.epsilon)
        .ok_or_else(|| Error::config("frontier.epsilon", "a target error probability is required"))?;
    let query = FrontierQuery {
        epsilon,
        messages: args.messages.or(f.messages).unwrap_or(2),
        dark_current: args.dark_current.or(f.dark_current).unwrap_or(0.0),
        power_range: (
            args.power_min.or(f.power_min).unwrap_or(DEFAULT_POWER_RANGE.0),
            args.power_max.or(f.power_max).unwrap_or(DEFAULT_POWER_RANGE.1),
        ),
        horizon_range: (
            args.horizon_min.or(f.horizon_min).unwrap_or(DEFAULT_HORIZON_RANGE.0),
            args.horizon_max.or(f.horizon_max).unwrap_or(DEFAULT_HORIZON_RANGE.1),
        ),
        probe_trials: args.probe_trials.or(f.probe_trials).unwrap_or(DEFAULT_PROBE_TRIALS),
        trials: output.n_trials,
        seed: output.seed,
    };
    let result = frontier(&query)?;
    emit(&[FrontierRow::from(&result)], output.format, output.out.as_deref())?;
    if !result.feasible() {
        eprintln!(
            "poisson-lab: infeasible: no {} point in A in [{}, {}], horizon in [{}, {}] reaches error {}",
            SchemeKind::natural(query.messages, query.dark_current),
            query.power_range.0,
            query.power_range.1,
            query.horizon_range.0,
            query.horizon_range.1,
            query.epsilon
        );
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let file = ConfigFile::load_optional(args.common.config.as_deref())?;
    let output = OutputOptions::resolve(&file.run, &args.common.run(), DEFAULT_VERIFY_TRIALS)?;
    let names = if args.suites.is_empty() { &file.verify.suites } else { &args.suites };
    let opts = VerifyOptions {
        suites: parse_suites(names)?,
        trials: output.n_trials,
        seed: output.seed,
        policies: args.policies.or(file.verify.policies).unwrap_or(DEFAULT_POLICIES),
    };
    let rows = run_verify(&opts)?;
    emit(&rows, output.format, output.out.as_deref())?;
    if all_pass(&rows) {
        Ok(0)
    } else {
        let failed = rows.iter().filter(|r| !r.pass).count();
        eprintln!("poisson-lab: {failed} of {} checks failed", rows.len());
        Ok(EXIT_VERIFY_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = init_thread_pool().and_then(|()| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("poisson-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
