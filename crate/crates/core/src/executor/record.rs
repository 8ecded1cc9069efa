use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::model::{ActionCmd, CpmState, RunConfig};

/// An agent respawned after a confirmed collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    /// Index of the first logged state after the respawn.
    pub step: usize,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Host-side timing, kept out of every persisted artifact.
#[derive(Debug, Clone, Default)]
pub struct WallClock {
    pub elapsed: Duration,
    /// Planner responses that missed the soft deadline.
    pub late_responses: usize,
}

/// Ground-truth log of one episode.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: RunConfig,
    /// Reference path name per agent.
    pub reference_paths: Vec<String>,
    /// `steps + 1` rows of per-agent states.
    pub states: Vec<Vec<CpmState>>,
    /// `steps` rows of per-agent applied commands; row `t` moves state `t` to `t + 1`.
    pub actions: Vec<Vec<ActionCmd>>,
    pub resets: Vec<ResetEvent>,
    pub wall_clock: WallClock,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.reference_paths == other.reference_paths
            && self.states == other.states
            && self.actions == other.actions
            && self.resets == other.resets
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentLine {
    id: usize,
    x: f64,
    y: f64,
    yaw: f64,
    speed: f64,
    steer_norm: f64,
    u_v: Option<f64>,
    u_sigma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepLine {
    step: usize,
    agents: Vec<AgentLine>,
}

/// Sidecar carrying what the per-step lines do not.
#[derive(Debug, Serialize, Deserialize)]
struct RecordMeta {
    config: RunConfig,
    reference_paths: Vec<String>,
    resets: Vec<ResetEvent>,
}

impl RunRecord {
    pub fn n_agents(&self) -> usize {
        self.reference_paths.len()
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn is_reset(&self, step: usize, agent: usize) -> bool {
        self.resets
            .iter()
            .any(|r| r.step == step && r.agent == agent)
    }

    pub fn positions(&self, agent: usize) -> Vec<Vec2> {
        self.states.iter().map(|row| row[agent].position).collect()
    }

    /// One JSON object per logged step.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for (t, row) in self.states.iter().enumerate() {
            let agents = row
                .iter()
                .enumerate()
                .map(|(id, s)| {
                    let cmd = self.actions.get(t).map(|a| a[id]);
                    AgentLine {
                        id,
                        x: s.position.x,
                        y: s.position.y,
                        yaw: s.yaw,
                        speed: s.speed,
                        steer_norm: s.steering_normalized,
                        u_v: cmd.map(|c| c.speed),
                        u_sigma: cmd.map(|c| c.steering),
                    }
                })
                .collect();
            serde_json::to_writer(&mut out, &StepLine { step: t, agents })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_meta(&self, out: impl Write) -> Result<()> {
        let meta = RecordMeta {
            config: self.config.clone(),
            reference_paths: self.reference_paths.clone(),
            resets: self.resets.clone(),
        };
        serde_json::to_writer_pretty(out, &meta)?;
        Ok(())
    }

    pub fn read(jsonl: impl BufRead, meta: impl std::io::Read) -> Result<Self> {
        let meta: RecordMeta = serde_json::from_reader(meta)?;
        let mut states = Vec::new();
        let mut actions = Vec::new();
        for (t, line) in jsonl.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: StepLine = serde_json::from_str(&line)?;
            if step.step != t || step.agents.len() != meta.reference_paths.len() {
                return Err(Error::InvalidTrajectory(format!("malformed log line {t}")));
            }
            states.push(
                step.agents
                    .iter()
                    .map(|a| CpmState {
                        position: Vec2::new(a.x, a.y),
                        yaw: a.yaw,
                        speed: a.speed,
                        steering_normalized: a.steer_norm,
                    })
                    .collect(),
            );
            let cmds: Option<Vec<ActionCmd>> = step
                .agents
                .iter()
                .map(|a| Some(ActionCmd::new(a.u_v?, a.u_sigma?)))
                .collect();
            if let Some(cmds) = cmds {
                actions.push(cmds);
            }
        }
        Ok(RunRecord {
            config: meta.config,
            reference_paths: meta.reference_paths,
            states,
            actions,
            resets: meta.resets,
            wall_clock: WallClock::default(),
        })
    }

    /// Writes `<stem>.jsonl` and `<stem>.meta.json` into `dir`.
    pub fn save(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut log =
            std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.jsonl")))?);
        self.write_jsonl(&mut log)?;
        log.flush()?;
        let mut meta = std::fs::File::create(dir.join(format!("{stem}.meta.json")))?;
        self.write_meta(&mut meta)?;
        meta.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(dir: &std::path::Path, stem: &str) -> Result<Self> {
        let log = std::io::BufReader::new(std::fs::File::open(dir.join(format!("{stem}.jsonl")))?);
        let meta = std::fs::File::open(dir.join(format!("{stem}.meta.json")))?;
        Self::read(log, meta)
    }
}
