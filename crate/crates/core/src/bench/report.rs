use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matrix::BenchResults;
use super::stats::{aggregate, AggregateStats};
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Constraint(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

/// Aggregates for one environment. Metric fields are `None` when no run succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub environment: String,
    pub runs: usize,
    pub failed: usize,
    pub cra_a: Option<AggregateStats>,
    pub cra_l: Option<AggregateStats>,
    pub cd: Option<AggregateStats>,
    #[serde(rename = "as")]
    pub avg_speed: Option<AggregateStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

const COLUMNS: [(&str, &str, usize); 4] = [
    ("cra_a", "CRA-A ↓", 2),
    ("cra_l", "CRA-L ↓", 2),
    ("cd", "CD ↓", 3),
    ("as", "AS ↑", 3),
];

impl ReportRow {
    fn metrics(&self) -> [Option<&AggregateStats>; 4] {
        [
            self.cra_a.as_ref(),
            self.cra_l.as_ref(),
            self.cd.as_ref(),
            self.avg_speed.as_ref(),
        ]
    }
}

pub fn build_report(results: &BenchResults) -> Result<Report> {
    if results.environments.is_empty() {
        return Err(Error::Empty("no environments in results"));
    }
    let rows = results
        .environments
        .iter()
        .map(|env| {
            let ok: Vec<&RunMetrics> = env.successful().map(|(_, m)| m).collect();
            let column = |f: fn(&RunMetrics) -> f64| {
                let values: Vec<f64> = ok.iter().map(|m| f(m)).collect();
                aggregate(&values).ok()
            };
            ReportRow {
                environment: env.name.clone(),
                runs: ok.len(),
                failed: env.failed().count(),
                cra_a: column(|m| m.cra_a),
                cra_l: column(|m| m.cra_l),
                cd: column(|m| m.cd),
                avg_speed: column(|m| m.avg_speed),
            }
        })
        .collect();
    Ok(Report { rows })
}

/// `mean ± std (iqm)` at a fixed number of decimals.
pub fn format_cell(s: &AggregateStats, decimals: usize) -> String {
    format!(
        "{:.d$} ± {:.d$} ({:.d$})",
        s.mean,
        s.std,
        s.iqm,
        d = decimals
    )
}

fn markdown(report: &Report) -> String {
    let mut out = String::from("| Environment |");
    for (_, header, _) in COLUMNS {
        write!(out, " {header} |").unwrap();
    }
    out.push_str(" n |\n|---|---|---|---|---|---|\n");
    let mut notes = Vec::new();
    for row in &report.rows {
        write!(out, "| {} |", row.environment).unwrap();
        for (stats, (_, _, decimals)) in row.metrics().into_iter().zip(COLUMNS) {
            match stats {
                Some(s) => write!(out, " {} |", format_cell(s, decimals)).unwrap(),
                None => out.push_str(" – |"),
            }
        }
        writeln!(out, " {} |", row.runs).unwrap();
        if row.runs == 1 {
            notes.push(format!(
                "{}: single run, std reported as 0",
                row.environment
            ));
        }
        if row.failed > 0 {
            notes.push(format!(
                "{}: {} failed run(s) excluded",
                row.environment, row.failed
            ));
        }
    }
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            writeln!(out, "- {n}").unwrap();
        }
    }
    out
}

fn csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["environment", "metric", "mean", "std", "iqm", "n", "failed"])
        .map_err(io_error)?;
    for row in &report.rows {
        for (stats, (key, _, _)) in row.metrics().into_iter().zip(COLUMNS) {
            let cells = match stats {
                Some(s) => [
                    s.mean.to_string(),
                    s.std.to_string(),
                    s.iqm.to_string(),
                    s.n.to_string(),
                ],
                None => Default::default(),
            };
            let mut record = vec![row.environment.clone(), key.to_string()];
            record.extend(cells);
            record.push(row.failed.to_string());
            w.write_record(&record).map_err(io_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn io_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Markdown => Ok(markdown(report)),
        ReportFormat::Csv => csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
    }
}
