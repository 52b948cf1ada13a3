//! Experiment harness: dataset ingestion and synthetic generators, repeated
//! attack runs over a parameter sweep, and CSV / JSON reports.

pub mod config;
pub mod data;
pub mod report;
mod run;

pub use config::{AttackSpec, DataSpec, ExperimentConfig, MixtureComponent, PerturbationSpec};
pub use data::{ingest_csv, write_records_csv, Generator};
pub use report::{emit_report, read_json_report, render, ReportFormat, CSV_COLUMNS};
pub use run::{
    aggregate, run_experiment, run_experiment_with, AggregateRow, ExperimentReport, MeanStd,
    Reason, RepetitionRow, RunOptions, Status, Timings, REPORT_SCHEMA_VERSION,
};
