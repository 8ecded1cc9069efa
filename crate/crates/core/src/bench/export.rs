use std::path::Path;

use super::matrix::{load_results, load_run, BenchResults};
use crate::error::{Error, Result};
use crate::executor::RunRecord;

/// Which run to export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunSelector {
    /// The run whose CD is nearest its environment's mean CD; first environment if unnamed.
    ClosestCd {
        environment: Option<String>,
    },
    Explicit {
        environment: String,
        cell: String,
    },
}

impl std::str::FromStr for RunSelector {
    type Err = Error;

    /// `closest-cd`, `closest-cd:<env>` or `<env>/<cell>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "closest-cd" {
            return Ok(RunSelector::ClosestCd { environment: None });
        }
        if let Some(env) = s.strip_prefix("closest-cd:") {
            return Ok(RunSelector::ClosestCd {
                environment: Some(env.to_string()),
            });
        }
        match s.split_once('/') {
            Some((env, cell)) if !env.is_empty() && !cell.is_empty() => Ok(RunSelector::Explicit {
                environment: env.to_string(),
                cell: cell.to_string(),
            }),
            _ => Err(Error::Constraint(format!(
                "unrecognized run selector {s:?}"
            ))),
        }
    }
}

/// Resolves a selector to `(environment, cell id)`.
pub fn select_run(results: &BenchResults, selector: &RunSelector) -> Result<(String, String)> {
    match selector {
        RunSelector::Explicit { environment, cell } => {
            let known = results
                .environments
                .iter()
                .filter(|e| &e.name == environment)
                .flat_map(|e| e.successful())
                .any(|(c, _)| &c.id == cell);
            if !known {
                return Err(Error::UnknownRun(format!("{environment}/{cell}")));
            }
            Ok((environment.clone(), cell.clone()))
        }
        RunSelector::ClosestCd { environment } => {
            let env = match environment {
                Some(name) => results
                    .environments
                    .iter()
                    .find(|e| &e.name == name)
                    .ok_or_else(|| Error::UnknownRun(format!("no environment {name:?}")))?,
                None => results
                    .environments
                    .first()
                    .ok_or(Error::Empty("no environments in results"))?,
            };
            let runs: Vec<_> = env.successful().collect();
            if runs.is_empty() {
                return Err(Error::Empty("no successful runs to select from"));
            }
            let mean = runs.iter().map(|(_, m)| m.cd).sum::<f64>() / runs.len() as f64;
            // first in matrix order wins ties
            let (cell, _) = runs
                .iter()
                .min_by(|a, b| (a.1.cd - mean).abs().total_cmp(&(b.1.cd - mean).abs()))
                .expect("non-empty");
            Ok((env.name.clone(), cell.id.clone()))
        }
    }
}

/// Position series as CSV with columns `agent,step,x,y`, agent-major.
pub fn trajectories_csv(record: &RunRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["agent", "step", "x", "y"]).map_err(io)?;
    for agent in 0..record.n_agents() {
        for (step, row) in record.states.iter().enumerate() {
            let p = row[agent].position;
            w.write_record([
                agent.to_string(),
                step.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Loads a results directory, picks a run, and renders its plot data.
pub fn export_trajectories(dir: &Path, selector: &RunSelector) -> Result<(String, String)> {
    let results = load_results(dir)?;
    let (env, cell) = select_run(&results, selector)?;
    let record = load_run(dir, &env, &cell)?;
    Ok((format!("{env}/{cell}"), trajectories_csv(&record)?))
}
