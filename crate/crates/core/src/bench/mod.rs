//! Run-matrix orchestration, aggregation and reporting.

mod export;
mod matrix;
mod report;
mod stats;

pub use export::{export_trajectories, select_run, trajectories_csv, RunSelector};
pub use matrix::{
    load_results, load_run, run_matrix, write_results, BenchMatrix, BenchResults, BenchRun,
    CellResult, Environment, EnvironmentResults,
};
pub use report::{build_report, emit_report, format_cell, Report, ReportFormat, ReportRow};
pub use stats::{aggregate, AggregateStats};
