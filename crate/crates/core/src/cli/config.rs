//! Experiment configuration: a TOML file whose sections mirror the command
//! options, overridden field by field by command-line flags.
//!
//! ```toml
//! [scheme]
//! kind = "mary"
//! M = 4
//! A = 100.0
//! horizon = 3.0
//! dark_current = 0.0
//!
//! [run]
//! trials = 1000000
//! seed = 0
//! format = "csv"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::schemes::{default_dark_power, default_dark_window, SchemeKind, SchemeSpec};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;
/// Defaults for the kinds without dark current.
pub const DEFAULT_POWER: f64 = 10.0;
pub const DEFAULT_HORIZON: f64 = 5.0;
pub const DEFAULT_MARY_MESSAGES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config("format", format!("expected csv or json, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: Option<String>,
    #[serde(rename = "M")]
    pub messages: Option<usize>,
    #[serde(rename = "A")]
    pub power: Option<f64>,
    pub horizon: Option<f64>,
    pub dark_current: Option<f64>,
    pub message: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub axes: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierSection {
    pub epsilon: Option<f64>,
    #[serde(rename = "M")]
    pub messages: Option<usize>,
    pub dark_current: Option<f64>,
    #[serde(rename = "A_min")]
    pub power_min: Option<f64>,
    #[serde(rename = "A_max")]
    pub power_max: Option<f64>,
    pub horizon_min: Option<f64>,
    pub horizon_max: Option<f64>,
    pub probe_trials: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub suites: Vec<String>,
    pub policies: Option<u64>,
}

/// Parsed configuration file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub frontier: FrontierSection,
    #[serde(default)]
    pub verify: VerifySection,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            Error::config(origin, e.to_string().trim_end().to_owned())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct SchemeOverrides {
    pub kind: Option<String>,
    pub messages: Option<usize>,
    pub power: Option<f64>,
    pub horizon: Option<f64>,
    pub dark_current: Option<f64>,
    pub message: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

/// Output options shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub n_trials: u64,
    pub seed: u64,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl OutputOptions {
    pub fn resolve(file: &RunSection, flags: &RunOverrides, default_trials: u64) -> Result<Self> {
        let n_trials = flags.trials.or(file.trials).unwrap_or(default_trials);
        if n_trials == 0 {
            return Err(Error::config("run.trials", "must be >= 1"));
        }
        let format = match flags.format.as_deref().or(file.format.as_deref()) {
            Some(f) => f.parse().map_err(|_| {
                Error::config("run.format", format!("expected csv or json, got {f:?}"))
            })?,
            None => OutputFormat::Csv,
        };
        Ok(Self {
            n_trials,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            format,
            out: flags.out.clone().or_else(|| file.out.clone()),
        })
    }
}

/// A fully resolved `simulate` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeSpec,
    /// Restrict the run to one message; all messages when `None`.
    pub message: Option<usize>,
    pub output: OutputOptions,
}

impl ExperimentConfig {
    pub fn resolve(file: &ConfigFile, scheme: &SchemeOverrides, run: &RunOverrides) -> Result<Self> {
        let spec = resolve_scheme(&file.scheme, scheme)?;
        let message = scheme.message.or(file.scheme.message);
        if let Some(m) = message {
            if m >= spec.messages {
                return Err(Error::config(
                    "scheme.message",
                    format!("message {m} out of range for M = {}", spec.messages),
                ));
            }
        }
        Ok(Self {
            scheme: spec,
            message,
            output: OutputOptions::resolve(&file.run, run, DEFAULT_TRIALS)?,
        })
    }

    pub fn messages(&self) -> Vec<usize> {
        match self.message {
            Some(m) => vec![m],
            None => (0..self.scheme.messages).collect(),
        }
    }
}

/// Merge flags over the file and fill kind-specific defaults.
pub fn resolve_scheme(file: &SchemeSection, flags: &SchemeOverrides) -> Result<SchemeSpec> {
    let dark = flags.dark_current.or(file.dark_current).unwrap_or(0.0);
    let messages = flags.messages.or(file.messages);
    let kind = match flags.kind.as_deref().or(file.kind.as_deref()) {
        Some(k) => k
            .parse::<SchemeKind>()
            .map_err(|e| Error::config("scheme.kind", e.to_string()))?,
        None => SchemeKind::natural(messages.unwrap_or(2), dark),
    };
    let messages = messages.unwrap_or(if kind.is_binary() { 2 } else { DEFAULT_MARY_MESSAGES });
    let (default_power, default_horizon) = if kind.is_zero_dark() {
        (DEFAULT_POWER, DEFAULT_HORIZON)
    } else {
        (default_dark_power(dark), default_dark_window(dark))
    };
    let spec = SchemeSpec {
        kind,
        messages,
        power: flags.power.or(file.power).unwrap_or(default_power),
        horizon: flags.horizon.or(file.horizon).unwrap_or(default_horizon),
        dark_current: dark,
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::config("scheme", msg),
        other => other,
    })?;
    Ok(spec)
}
