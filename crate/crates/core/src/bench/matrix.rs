use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{derive_seed, run_episode, InProcessPlanner, RunRecord};
use crate::metrics::{evaluate, MetricOptions, RunMetrics};
use crate::model::{AgentPlacement, DisturbanceProfile, ExecutionMode, MapModel, RunConfig};
use crate::policy::PolicySpec;

/// One row of the benchmark table: a realism tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub name: String,
    pub mode: ExecutionMode,
    #[serde(deserialize_with = "crate::model::deserialize_disturbance")]
    pub disturbance: DisturbanceProfile,
}

/// Seeds x placements x repetitions, run in every environment.
///
/// Placement sets are shared by all environments so initial positions match
/// across rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchMatrix {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub policy: PolicySpec,
    /// Shared episode settings; mode and disturbance come from the environment.
    #[serde(default)]
    pub config: RunConfig,
    pub environments: Vec<Environment>,
    pub policy_seeds: Vec<u64>,
    pub placements: Vec<Vec<AgentPlacement>>,
    pub repetitions: usize,
    #[serde(default)]
    pub metrics: MetricOptions,
}

impl BenchMatrix {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: BenchMatrix = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Constraint(format!("matrix: {msg}")));
        if self.environments.is_empty() {
            return fail("no environments");
        }
        if self.policy_seeds.is_empty() {
            return fail("no policy seeds");
        }
        if self.placements.is_empty() {
            return fail("no placements");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be >= 1");
        }
        let mut names: Vec<&str> = self.environments.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return fail("duplicate environment names");
        }
        if names
            .iter()
            .any(|n| n.is_empty() || n.contains(['/', '\\']))
        {
            return fail("environment names must be non-empty and contain no path separators");
        }
        for env in &self.environments {
            for placements in &self.placements {
                self.cell_config(env, placements, 0).validate()?;
            }
        }
        Ok(())
    }

    pub fn runs_per_environment(&self) -> usize {
        self.policy_seeds.len() * self.placements.len() * self.repetitions
    }

    fn cell_config(
        &self,
        env: &Environment,
        placements: &[AgentPlacement],
        seed: u64,
    ) -> RunConfig {
        let mut cfg = self.config.clone();
        cfg.mode = env.mode;
        cfg.disturbance = env.disturbance;
        cfg.n_agent = placements.len().max(1);
        cfg.placements = placements.to_vec();
        cfg.seed = seed;
        cfg
    }

    /// Three agents a third of a lap apart on the map's first reference path,
    /// three placement sets offset by a ninth of a lap, three policy seeds and
    /// three repetitions, in the `sim`, `twin` and `lab` tiers.
    pub fn desk_default(map: &MapModel) -> Result<Self> {
        let rp = map
            .reference_paths()
            .first()
            .ok_or_else(|| Error::Constraint("map has no reference paths".into()))?;
        let len = rp.polyline.length();
        let placements = (0..3)
            .map(|k| {
                (0..3)
                    .map(|i| {
                        AgentPlacement::on_path(
                            rp.name.clone(),
                            k as f64 * len / 9.0 + i as f64 * len / 3.0,
                        )
                    })
                    .collect()
            })
            .collect();
        let env = |name: &str, mode| Environment {
            name: name.into(),
            mode,
            disturbance: DisturbanceProfile::preset(name).expect("known preset"),
        };
        Ok(BenchMatrix {
            master_seed: 0,
            policy: PolicySpec::default(),
            config: RunConfig::default(),
            environments: vec![
                env("sim", ExecutionMode::Direct),
                env("twin", ExecutionMode::Follow),
                env("lab", ExecutionMode::Follow),
            ],
            policy_seeds: vec![0, 1, 2],
            placements,
            repetitions: 3,
            metrics: MetricOptions::default(),
        })
    }
}

/// Outcome of one cell; exactly one of `metrics` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub id: String,
    pub policy_seed: u64,
    pub placement: usize,
    pub repetition: usize,
    /// Seed actually handed to the episode.
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentResults {
    pub name: String,
    pub cells: Vec<CellResult>,
}

impl EnvironmentResults {
    pub fn successful(&self) -> impl Iterator<Item = (&CellResult, &RunMetrics)> {
        self.cells
            .iter()
            .filter_map(|c| c.metrics.as_ref().map(|m| (c, m)))
    }

    pub fn failed(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub environments: Vec<EnvironmentResults>,
}

/// Results plus the ground-truth record of every successful cell, in the same order.
pub struct BenchRun {
    pub results: BenchResults,
    pub records: Vec<Vec<Option<RunRecord>>>,
}

struct Cell<'a> {
    env: &'a Environment,
    policy_seed: u64,
    placement: usize,
    repetition: usize,
}

impl Cell<'_> {
    fn id(&self) -> String {
        format!(
            "s{}_p{}_r{}",
            self.policy_seed, self.placement, self.repetition
        )
    }

    fn seed(&self, master: u64) -> u64 {
        derive_seed(&[
            &master.to_string(),
            &self.env.name,
            &self.policy_seed.to_string(),
            &self.placement.to_string(),
            &self.repetition.to_string(),
        ])
    }
}

/// Executes every cell (in parallel) and collects results in matrix order.
/// A failing episode marks its cell failed and does not stop the others.
pub fn run_matrix(matrix: &BenchMatrix, map: &MapModel) -> Result<BenchRun> {
    matrix.validate()?;
    let policy = matrix.policy.build();
    let mut cells = Vec::new();
    for env in &matrix.environments {
        for &policy_seed in &matrix.policy_seeds {
            for placement in 0..matrix.placements.len() {
                for repetition in 0..matrix.repetitions {
                    cells.push(Cell {
                        env,
                        policy_seed,
                        placement,
                        repetition,
                    });
                }
            }
        }
    }

    let outcomes: Vec<(CellResult, Option<RunRecord>)> = cells
        .par_iter()
        .map(|cell| {
            let seed = cell.seed(matrix.master_seed);
            let mut cfg = matrix.cell_config(cell.env, &matrix.placements[cell.placement], seed);
            cfg.disturbance.noise_seed = seed;
            let outcome = run_episode(&cfg, map, &mut InProcessPlanner::new(policy.as_ref()))
                .and_then(|rec| evaluate(&rec, map, &matrix.metrics).map(|m| (rec, m)));
            let mut result = CellResult {
                id: cell.id(),
                policy_seed: cell.policy_seed,
                placement: cell.placement,
                repetition: cell.repetition,
                seed,
                metrics: None,
                error: None,
            };
            match outcome {
                Ok((rec, m)) => {
                    result.metrics = Some(m);
                    (result, Some(rec))
                }
                Err(e) => {
                    log::warn!("{}/{} failed: {e}", cell.env.name, result.id);
                    result.error = Some(e.to_string());
                    (result, None)
                }
            }
        })
        .collect();

    let per_env = matrix.runs_per_environment();
    let mut environments = Vec::new();
    let mut records = Vec::new();
    let mut outcomes = outcomes.into_iter();
    for env in &matrix.environments {
        let (cells, recs): (Vec<_>, Vec<_>) = outcomes.by_ref().take(per_env).unzip();
        environments.push(EnvironmentResults {
            name: env.name.clone(),
            cells,
        });
        records.push(recs);
    }
    Ok(BenchRun {
        results: BenchResults { environments },
        records,
    })
}

const MATRIX_FILE: &str = "matrix.json";
const METRICS_FILE: &str = "metrics.json";
const RUNS_DIR: &str = "runs";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `matrix.json`, `metrics.json` and `runs/<env>/<cell>.{jsonl,meta.json}`.
/// Contains nothing time-dependent, so identical runs give identical directories.
pub fn write_results(dir: &Path, matrix: &BenchMatrix, run: &BenchRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(MATRIX_FILE), matrix)?;
    write_json(&dir.join(METRICS_FILE), &run.results)?;
    for (env, recs) in run.results.environments.iter().zip(&run.records) {
        let env_dir = dir.join(RUNS_DIR).join(&env.name);
        fs::create_dir_all(&env_dir)?;
        for (cell, rec) in env.cells.iter().zip(recs) {
            if let Some(rec) = rec {
                rec.save(&env_dir, &cell.id)?;
            }
        }
    }
    Ok(())
}

pub fn load_results(dir: &Path) -> Result<BenchResults> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join(METRICS_FILE),
    )?)?)
}

pub fn load_run(dir: &Path, environment: &str, cell: &str) -> Result<RunRecord> {
    let env_dir = dir.join(RUNS_DIR).join(environment);
    if !env_dir.join(format!("{cell}.jsonl")).is_file() {
        return Err(Error::UnknownRun(format!("{environment}/{cell}")));
    }
    RunRecord::load(&env_dir, cell)
}
