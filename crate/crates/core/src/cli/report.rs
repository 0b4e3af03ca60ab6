//! CSV and JSON emission of Monte Carlo reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::MCReport;

/// Column order of the CSV output.
pub const CSV_COLUMNS: [&str; 14] = [
    "experiment", "estimator", "seed", "reps", "n", "M", "d", "beta", "delta", "bound", "empirical", "stderr",
    "margin", "pass",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One emitted record; keys match [`CSV_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub estimator: String,
    pub seed: u64,
    pub reps: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub bound: Option<f64>,
    pub empirical: f64,
    pub stderr: f64,
    pub margin: Option<f64>,
    pub pass: Option<bool>,
}

/// `%.12g`-style rendering: 12 significant digits, positional notation for
/// decimal exponents in `[-5, 12)`, trailing zeros removed.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format_sig12(x).parse().unwrap_or(x)
    } else {
        x
    }
}

impl ReportRow {
    pub fn from_report(r: &MCReport) -> Self {
        Self {
            experiment: r.experiment.clone(),
            estimator: r.estimator_id.clone(),
            seed: r.seed,
            reps: r.replications,
            n: r.n,
            m: r.m,
            d: r.d,
            beta: r.beta.map(round12),
            delta: r.delta.map(round12),
            bound: r.bound.map(round12),
            empirical: round12(r.empirical),
            stderr: round12(r.stderr),
            margin: r.margin.map(round12),
            pass: r.pass,
        }
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_sig12).unwrap_or_default();
        [
            self.experiment.clone(),
            self.estimator.clone(),
            self.seed.to_string(),
            self.reps.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.d.to_string(),
            opt(self.beta),
            opt(self.delta),
            opt(self.bound),
            format_sig12(self.empirical),
            format_sig12(self.stderr),
            opt(self.margin),
            self.pass.map(|p| p.to_string()).unwrap_or_default(),
        ]
        .join(",")
    }
}

/// Renders reports in the requested format.
pub fn render_reports(reports: &[MCReport], format: Format) -> Result<String> {
    if reports.is_empty() {
        return Err(invalid("no reports to emit"));
    }
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from_report).collect();
    Ok(match format {
        Format::Csv => {
            let mut out = CSV_COLUMNS.join(",");
            out.push('\n');
            for row in &rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rows).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            s
        }
    })
}

/// Writes reports to `path`, or to standard output when `path` is `None`.
pub fn emit_report(reports: &[MCReport], format: Format, path: Option<&Path>) -> Result<()> {
    let text = render_reports(reports, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Summary;

    fn sample_report() -> MCReport {
        let s = Summary::from_losses(&[0.25, 0.5, 1.0 / 3.0], &[0.5]).unwrap();
        MCReport::from_summary("fixed-ew", "ew", 7, &s)
            .with_shape(200, 10, 0)
            .with_beta(25.0)
            .judge_mean(0.8)
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(25.0), "25");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(format_sig12(123456.789), "123456.789");
        assert_eq!(format_sig12(1.5e-7), "1.5e-7");
        assert_eq!(format_sig12(6.02214076e23), "6.02214076e23");
        assert_eq!(format_sig12(1e-5), "0.00001");
    }

    #[test]
    fn csv_has_header_and_row() {
        let text = render_reports(&[sample_report()], Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert!(lines[1].starts_with("fixed-ew,ew,7,3,200,10,0,25,,0.8,"));
        assert!(lines[1].ends_with(",true"));
    }

    #[test]
    fn json_round_trip() {
        let report = sample_report();
        let text = render_reports(&[report.clone()], Format::Json).unwrap();
        let rows: Vec<ReportRow> = serde_json::from_str(&text).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row, &ReportRow::from_report(&report));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        assert!(close(row.empirical, report.empirical));
        assert!(close(row.stderr, report.stderr));
        assert!(close(row.margin.unwrap(), report.margin.unwrap()));
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&String> = value[0].as_object().unwrap().keys().collect();
        let mut expected: Vec<&str> = CSV_COLUMNS.to_vec();
        expected.sort_unstable();
        let mut keys: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, expected);
    }

    #[test]
    fn empty_reports_rejected() {
        assert!(render_reports(&[], Format::Csv).is_err());
    }
}
