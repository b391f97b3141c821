//! Machine-readable reports.
//!
//! CSV floats are written in scientific notation with 17 significant digits,
//! enough to round-trip every `f64`. JSON output is one object per line with
//! the same field names.

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::cli::config::OutputFormat;
use crate::error::Result;
use crate::schemes::SchemeKind;

/// A row type that can be written as CSV or JSON lines.
pub trait Record: Serialize {
    fn header() -> &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Render rows into a byte buffer.
pub fn render<R: Record>(rows: &[R], format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(R::header())?;
            for row in rows {
                w.write_record(row.csv_fields())?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            for row in rows {
                serde_json::to_writer(&mut buf, row)?;
                buf.push(b'\n');
            }
        }
    }
    Ok(buf)
}

/// Render rows and write them to `out`, or to stdout when `out` is `None`.
/// Nothing is written unless rendering succeeds.
pub fn emit<R: Record>(rows: &[R], format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let bytes = render(rows, format)?;
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Which message a simulation row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageLabel {
    Single(usize),
    /// Uniform average over all messages.
    Average,
}

impl MessageLabel {
    fn render(self) -> String {
        match self {
            MessageLabel::Single(m) => m.to_string(),
            MessageLabel::Average => "avg".to_owned(),
        }
    }
}

impl Serialize for MessageLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MessageLabel::Single(m) => s.serialize_u64(*m as u64),
            MessageLabel::Average => s.serialize_str("avg"),
        }
    }
}

/// One row of `simulate` / `sweep` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub kind: SchemeKind,
    #[serde(rename = "M")]
    pub messages: usize,
    #[serde(rename = "A")]
    pub power: f64,
    pub horizon: f64,
    pub dark_current: f64,
    pub message: MessageLabel,
    pub n_trials: u64,
    pub p_err: f64,
    pub p_err_lo: f64,
    pub p_err_hi: f64,
    pub energy: f64,
    pub energy_lo: f64,
    pub energy_hi: f64,
    pub cf_p_err: Option<f64>,
    pub cf_energy: Option<f64>,
    pub seed: u64,
}

pub const REPORT_HEADER: [&str; 16] = [
    "kind",
    "M",
    "A",
    "horizon",
    "dark_current",
    "message",
    "n_trials",
    "p_err",
    "p_err_lo",
    "p_err_hi",
    "energy",
    "energy_lo",
    "energy_hi",
    "cf_p_err",
    "cf_energy",
    "seed",
];

impl Record for ReportRow {
    fn header() -> &'static [&'static str] {
        &REPORT_HEADER
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.kind.as_str().to_owned(),
            self.messages.to_string(),
            fmt_f64(self.power),
            fmt_f64(self.horizon),
            fmt_f64(self.dark_current),
            self.message.render(),
            self.n_trials.to_string(),
            fmt_f64(self.p_err),
            fmt_f64(self.p_err_lo),
            fmt_f64(self.p_err_hi),
            fmt_f64(self.energy),
            fmt_f64(self.energy_lo),
            fmt_f64(self.energy_hi),
            fmt_opt(self.cf_p_err),
            fmt_opt(self.cf_energy),
            self.seed.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            kind: SchemeKind::BinaryZeroDark,
            messages: 2,
            power: 10.0,
            horizon: 5.0,
            dark_current: 0.0,
            message: MessageLabel::Average,
            n_trials: 100,
            p_err: 0.0,
            p_err_lo: 0.0,
            p_err_hi: 0.01,
            energy: 0.1 + 0.2,
            energy_lo: 0.25,
            energy_hi: 0.35,
            cf_p_err: Some(1e-22),
            cf_energy: None,
            seed: 0,
        }
    }

    #[test]
    fn csv_header_is_exact() {
        let out = String::from_utf8(render::<ReportRow>(&[], OutputFormat::Csv).unwrap()).unwrap();
        assert_eq!(
            out,
            "kind,M,A,horizon,dark_current,message,n_trials,p_err,p_err_lo,p_err_hi,\
             energy,energy_lo,energy_hi,cf_p_err,cf_energy,seed\n"
        );
    }

    #[test]
    fn floats_round_trip() {
        let out = String::from_utf8(render(&[row()], OutputFormat::Csv).unwrap()).unwrap();
        let line = out.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[5], "avg");
        assert_eq!(fields[10], "3.0000000000000004e-1");
        assert_eq!(fields[10].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(fields[14], "");
    }

    #[test]
    fn json_uses_same_names() {
        let out = String::from_utf8(render(&[row()], OutputFormat::Json).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        let obj = v.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        for name in REPORT_HEADER {
            assert!(keys.contains(&name), "{name}");
        }
        assert_eq!(obj["message"], "avg");
        assert_eq!(obj["kind"], "binary-zero-dark");
        assert!(obj["cf_energy"].is_null());
    }
}
