use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{AggregateRow, ExperimentReport, MeanStd, RepetitionRow, Status};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Column order of the CSV report. Rows with `kind = rep` fill the
/// per-repetition columns, rows with `kind = aggregate` the aggregate ones;
/// unused cells are empty.
pub const CSV_COLUMNS: [&str; 34] = [
    "kind",
    "point",
    "parameter",
    "repetition",
    "status",
    "reason",
    "linked",
    "sample_size",
    "rho",
    "chosen_record",
    "relative_error",
    "min_nad",
    "cos_gap",
    "eps_breach",
    "med_breach",
    "cos_breach",
    "p_value",
    "min_eigen_ratio",
    "record_breach_fraction",
    "attack_secs",
    "total_secs",
    "repetitions",
    "feasible",
    "eps_breach_fraction",
    "med_breach_fraction",
    "cos_breach_fraction",
    "rho_mean",
    "rho_std",
    "linked_mean",
    "linked_std",
    "record_breach_fraction_mean",
    "record_breach_fraction_std",
    "p_value_mean",
    "p_value_std",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn rep_record(r: &RepetitionRow) -> Vec<String> {
    let mut out = vec![
        "rep".to_string(),
        r.point.to_string(),
        r.parameter.to_string(),
        r.repetition.to_string(),
        match r.status {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
        }
        .to_string(),
        opt(r.reason.map(|x| x.as_str())),
        opt(r.linked),
        opt(r.sample_size),
        opt(r.rho),
        opt(r.chosen_record),
        opt(r.relative_error),
        opt(r.min_nad),
        opt(r.cos_gap),
        r.eps_breach.to_string(),
        r.med_breach.to_string(),
        r.cos_breach.to_string(),
        opt(r.p_value),
        opt(r.min_eigen_ratio),
        opt(r.record_breach_fraction),
        opt(r.timings.map(|t| t.attack_secs)),
        opt(r.timings.map(|t| t.total_secs)),
    ];
    out.resize(CSV_COLUMNS.len(), String::new());
    out
}

fn aggregate_record(a: &AggregateRow) -> Vec<String> {
    let mut out = vec![
        "aggregate".to_string(),
        a.point.to_string(),
        a.parameter.to_string(),
    ];
    out.resize(21, String::new());
    let pair = |m: Option<MeanStd>| [opt(m.map(|m| m.mean)), opt(m.map(|m| m.std))];
    out.extend([
        a.repetitions.to_string(),
        a.feasible.to_string(),
        a.eps_breach_fraction.to_string(),
        a.med_breach_fraction.to_string(),
        a.cos_breach_fraction.to_string(),
    ]);
    out.extend(pair(a.rho));
    out.extend(pair(a.linked));
    out.extend(pair(a.record_breach_fraction));
    out.extend(pair(a.p_value));
    out
}

pub fn write_csv<W: Write>(report: &ExperimentReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.rows {
        w.write_record(rep_record(r))?;
    }
    for a in &report.aggregates {
        w.write_record(aggregate_record(a))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(report: &ExperimentReport, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, report)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn render(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        ReportFormat::Csv => write_csv(report, &mut buf)?,
        ReportFormat::Json => write_json(report, &mut buf)?,
    }
    Ok(buf)
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(report, format)?)?;
    Ok(())
}

pub fn read_json_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
