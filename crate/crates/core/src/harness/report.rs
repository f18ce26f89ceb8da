//! Report emission. Everything written here is a pure function of the
//! rows and settings, with no timestamps or absolute paths, so re-running
//! a command with the same seeds reproduces its outputs byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::controller::OperatingPoint;
use crate::evaluation::{ReportRow, RunRecord};
use crate::protocol::ProtocolConfig;
use crate::screening::LengthBoundParams;

/// Marker for an undefined conditional metric in CSV and summary lines.
pub const UNDEFINED: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_m: u32,
    /// Coverage Full GRC attains on the held-out split.
    pub target_coverage_pct: f64,
    pub threshold: f64,
    pub heldout_n: usize,
    pub test_n: usize,
    /// Coverage the calibrated baseline actually reaches on the test split.
    pub realized_coverage_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub dataset: String,
    pub backend: String,
    pub protocol: ProtocolConfig,
    pub length_bound: LengthBoundParams,
    pub operating_points: Vec<OperatingPoint>,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibration: Option<Calibration>,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_records_jsonl(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| HarnessError::Output(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| HarnessError::Output(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Full table: one line per row, every field.
pub fn write_rows_csv(path: &Path, rows: &[ReportRow]) -> Result<(), HarnessError> {
    let header = [
        "label",
        "method",
        "m",
        "k_views",
        "coverage_pct",
        "cer_mean_pct",
        "cer_p99_pct",
        "meltdown_permille",
        "n_total",
        "n_covered",
        "n_errors",
        "backend_calls",
        "relative_cost",
    ];
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                r.method.clone(),
                opt(r.m),
                r.k_views.to_string(),
                r.coverage_pct.to_string(),
                opt(r.cer_mean_pct),
                opt(r.cer_p99_pct),
                opt(r.meltdown_permille),
                r.n_total.to_string(),
                r.n_covered.to_string(),
                r.n_errors.to_string(),
                r.backend_calls.to_string(),
                opt(r.relative_cost),
            ]
        }),
    )
}

/// Plot-ready risk-coverage trajectory: x is coverage, y is CER or meltdown.
pub fn write_trajectory_csv(path: &Path, rows: &[ReportRow]) -> Result<(), HarnessError> {
    let header = [
        "label",
        "method",
        "m",
        "k_views",
        "coverage_pct",
        "cer_mean_pct",
        "meltdown_permille",
        "relative_cost",
    ];
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                r.method.clone(),
                opt(r.m),
                r.k_views.to_string(),
                r.coverage_pct.to_string(),
                opt(r.cer_mean_pct),
                opt(r.meltdown_permille),
                opt(r.relative_cost),
            ]
        }),
    )
}

/// One-line human summary of a row.
pub fn summary_line(row: &ReportRow) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.2}"));
    format!(
        "{}  cov={:.2}%  cer={}%  p99={}%  md@delta={}‰  n={}/{}  errors={}  calls={}",
        row.label,
        row.coverage_pct,
        f(row.cer_mean_pct),
        f(row.cer_p99_pct),
        f(row.meltdown_permille),
        row.n_covered,
        row.n_total,
        row.n_errors,
        row.backend_calls,
    )
}
