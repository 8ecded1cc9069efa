//! Tick-synchronized episode execution.
//!
//! Every tick the executor assembles the (possibly aged and noisy) state list,
//! asks the planner for one reference trajectory per agent, turns those into
//! commands (directly or through the follower), pushes the commands through
//! the actuation delay queue and advances the ground truth. Nothing here reads
//! the wall clock except for diagnostics, so results depend only on the
//! configuration and seeds.

mod follower;
mod record;
mod rng;
pub mod wire;

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use follower::{follow_step, sample};
pub use record::{ResetEvent, RunRecord, WallClock};
pub use rng::{derive_seed, stream, StreamPurpose};

use crate::dynamics::{map_cpm_to_sigma, map_sigma_to_cpm, step_bicycle_substeps};
use crate::error::{Error, Result};
use crate::geometry::{lane_violation_depth, project_onto_polyline_aligned, wrap_angle, Vec2};
use crate::metrics::{overlapping, state_footprint, Hysteresis, Transition};
use crate::model::{
    ActionCmd, CpmState, ExecutionMode, MapModel, ReferencePath, RunConfig, SigmaState,
};
use crate::planner::{generate_trajectory, stopping_trajectory, PlanRequest, ReferenceTrajectory};
use crate::policy::Policy;

/// Backward step along the reference path while searching for a clear respawn pose.
pub const RESPAWN_SHIFT: f64 = 0.1;

/// What a planner learns once, before the first tick.
pub struct Session<'a> {
    pub cfg: &'a RunConfig,
    pub map: &'a MapModel,
    /// Reference path name per agent.
    pub reference_paths: &'a [String],
}

/// The state list handed to the planner at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRequest {
    pub step: usize,
    pub time: f64,
    pub agents: Vec<CpmState>,
}

/// Where trajectories come from: an in-process policy or a remote endpoint.
pub trait PlannerBinding {
    fn begin(&mut self, session: &Session<'_>) -> Result<()>;
    /// One trajectory per agent, in agent order.
    fn plan(&mut self, tick: &TickRequest) -> Result<Vec<ReferenceTrajectory>>;
    fn end(&mut self) -> Result<()>;
}

struct PlannerState {
    cfg: RunConfig,
    map: MapModel,
    reference_paths: Vec<ReferencePath>,
    rngs: Vec<ChaCha8Rng>,
    exhausted: Vec<bool>,
}

/// Runs the receding-horizon rollout for every agent with a local policy.
/// Also the engine behind the wire client, so both bindings plan identically.
pub struct InProcessPlanner<'p> {
    policy: &'p dyn Policy,
    state: Option<PlannerState>,
}

impl<'p> InProcessPlanner<'p> {
    pub fn new(policy: &'p dyn Policy) -> Self {
        InProcessPlanner {
            policy,
            state: None,
        }
    }
}

impl PlannerBinding for InProcessPlanner<'_> {
    fn begin(&mut self, session: &Session<'_>) -> Result<()> {
        let reference_paths = session
            .reference_paths
            .iter()
            .map(|name| lookup_path(session.map, name).cloned())
            .collect::<Result<Vec<_>>>()?;
        let n = reference_paths.len();
        self.state = Some(PlannerState {
            cfg: session.cfg.clone(),
            map: session.map.clone(),
            rngs: (0..n)
                .map(|i| stream(session.cfg.seed, StreamPurpose::Policy, i))
                .collect(),
            exhausted: vec![false; n],
            reference_paths,
        });
        Ok(())
    }

    fn plan(&mut self, tick: &TickRequest) -> Result<Vec<ReferenceTrajectory>> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Protocol("plan requested before begin".into()))?;
        if tick.agents.len() != st.reference_paths.len() {
            return Err(Error::Protocol(format!(
                "tick carries {} agents, session has {}",
                tick.agents.len(),
                st.reference_paths.len()
            )));
        }
        let states: Vec<SigmaState> = tick
            .agents
            .iter()
            .map(|s| map_cpm_to_sigma(s, &st.cfg.vehicle))
            .collect();
        let mut out = Vec::with_capacity(states.len());
        for i in 0..states.len() {
            let stop = || stopping_trajectory(&states[i], &st.cfg, tick.time).to_reference();
            if st.exhausted[i] {
                out.push(stop());
                continue;
            }
            let req = PlanRequest {
                ego_index: i,
                states: &states,
                map: &st.map,
                reference_path: &st.reference_paths[i],
                cfg: &st.cfg,
                t0: tick.time,
            };
            match generate_trajectory(self.policy, &req, &mut st.rngs[i]) {
                Ok(traj) => out.push(traj.to_reference()),
                Err(Error::PathExhausted { agent }) => {
                    log::info!("agent {agent} reached the end of its path; stopping");
                    st.exhausted[i] = true;
                    out.push(stop());
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    fn end(&mut self) -> Result<()> {
        self.state = None;
        Ok(())
    }
}

fn lookup_path<'m>(map: &'m MapModel, name: &str) -> Result<&'m ReferencePath> {
    map.reference_path(name)
        .ok_or_else(|| Error::Constraint(format!("map has no reference path {name:?}")))
}

/// Initial ground-truth states and reference path names.
pub fn resolve_placements(
    cfg: &RunConfig,
    map: &MapModel,
) -> Result<(Vec<SigmaState>, Vec<String>)> {
    let params = &cfg.vehicle;
    if cfg.placements.is_empty() {
        let rp = map
            .reference_paths()
            .first()
            .ok_or_else(|| Error::Constraint("map has no reference paths".into()))?;
        let spacing = rp.polyline.length() / cfg.n_agent as f64;
        let states = (0..cfg.n_agent)
            .map(|i| {
                let s = i as f64 * spacing;
                SigmaState::at_rest(rp.polyline.point_at(s), rp.polyline.heading_at(s))
            })
            .collect();
        return Ok((states, vec![rp.name.clone(); cfg.n_agent]));
    }
    let mut states = Vec::with_capacity(cfg.placements.len());
    let mut names = Vec::with_capacity(cfg.placements.len());
    for p in &cfg.placements {
        let rp = lookup_path(map, &p.path)?;
        let (position, yaw) = match (p.pose, p.s) {
            (Some(pose), _) => (Vec2::new(pose.x, pose.y), pose.yaw),
            (None, s) => {
                let s = s.unwrap_or(0.0);
                (rp.polyline.point_at(s), rp.polyline.heading_at(s))
            }
        };
        let cpm = CpmState::new(position, yaw, p.speed, 0.0);
        states.push(map_cpm_to_sigma(&cpm, params));
        names.push(rp.name.clone());
    }
    Ok((states, names))
}

fn validate_plans(
    plans: &[ReferenceTrajectory],
    cfg: &RunConfig,
    n: usize,
    time: f64,
) -> Result<()> {
    if plans.len() != n {
        return Err(Error::InvalidTrajectory(format!(
            "expected {n} trajectories, got {}",
            plans.len()
        )));
    }
    for (i, p) in plans.iter().enumerate() {
        if p.points.len() != cfg.h_p + 1 {
            return Err(Error::InvalidTrajectory(format!(
                "agent {i}: {} points, expected H_p + 1 = {}",
                p.points.len(),
                cfg.h_p + 1
            )));
        }
        if (p.t0 - time).abs() > 1e-9 || (p.dt - cfg.dt).abs() > 1e-12 {
            return Err(Error::InvalidTrajectory(format!(
                "agent {i}: t0={} dt={} does not match tick time {time} and dt {}",
                p.t0, p.dt, cfg.dt
            )));
        }
        let finite = p.points.iter().all(|q| {
            [q.x, q.y, q.yaw, q.speed, q.steer]
                .iter()
                .all(|v| v.is_finite())
        });
        if !finite {
            return Err(Error::InvalidTrajectory(format!(
                "agent {i}: non-finite sample"
            )));
        }
    }
    Ok(())
}

/// Observation disturbances for one agent.
struct Observer {
    position: ChaCha8Rng,
    yaw: ChaCha8Rng,
}

impl Observer {
    fn perturb(&mut self, s: &CpmState, pos_std: f64, yaw_std: f64) -> CpmState {
        let mut out = *s;
        if pos_std > 0.0 {
            let dx: f64 = self.position.sample(StandardNormal);
            let dy: f64 = self.position.sample(StandardNormal);
            out.position += Vec2::new(dx, dy) * pos_std;
        }
        if yaw_std > 0.0 {
            let dyaw: f64 = self.yaw.sample(StandardNormal);
            out.yaw = wrap_angle(out.yaw + dyaw * yaw_std);
        }
        out
    }
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn respawn_is_clear(
    agent: usize,
    candidate: &CpmState,
    row: &[CpmState],
    cfg: &RunConfig,
    map: &MapModel,
) -> bool {
    let params = &cfg.vehicle;
    row.iter()
        .enumerate()
        .all(|(j, other)| j == agent || !overlapping(candidate, other, params))
        && lane_violation_depth(&state_footprint(candidate, params), map.drivable_area()) == 0.0
}

/// Finds a clear pose at or behind `start`, stepping back along the path.
fn find_respawn(
    agent: usize,
    start: &SigmaState,
    row: &[CpmState],
    path: &ReferencePath,
    cfg: &RunConfig,
    map: &MapModel,
) -> Result<SigmaState> {
    let line = &path.polyline;
    let mut pose = SigmaState::at_rest(start.position, start.yaw);
    let mut s = project_onto_polyline_aligned(pose.position, pose.yaw, 0.5, line).arc_length;
    let tries = (line.length() / RESPAWN_SHIFT).ceil() as usize + 1;
    for _ in 0..tries {
        if respawn_is_clear(agent, &map_sigma_to_cpm(&pose, &cfg.vehicle), row, cfg, map) {
            return Ok(pose);
        }
        s = line.normalize_arc(s - RESPAWN_SHIFT);
        pose = SigmaState::at_rest(line.point_at(s), line.heading_at(s));
    }
    Err(Error::Degenerate(format!(
        "no clear respawn pose for agent {agent} along {:?}",
        path.name
    )))
}

/// Executes one episode. The record holds ground truth only; noise and
/// latency affect nothing but what the planner sees.
pub fn run_episode(
    cfg: &RunConfig,
    map: &MapModel,
    planner: &mut dyn PlannerBinding,
) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let params = &cfg.vehicle;
    let (mut truth, names) = resolve_placements(cfg, map)?;
    let n = truth.len();
    let paths = names
        .iter()
        .map(|name| lookup_path(map, name))
        .collect::<Result<Vec<_>>>()?;

    let dist = &cfg.disturbance;
    let (pos_std, yaw_std, delay, latency) = (
        dist.position_noise(),
        dist.yaw_noise(),
        dist.delay(),
        dist.latency(),
    );
    let noise_seed = derive_seed(&[&cfg.seed.to_string(), &dist.noise_seed.to_string()]);
    let mut observers: Vec<Observer> = (0..n)
        .map(|i| Observer {
            position: stream(noise_seed, StreamPurpose::PositionNoise, i),
            yaw: stream(noise_seed, StreamPurpose::YawNoise, i),
        })
        .collect();

    let log_row = |truth: &[SigmaState]| -> Vec<CpmState> {
        truth.iter().map(|s| map_sigma_to_cpm(s, params)).collect()
    };
    let mut states = vec![log_row(&truth)];
    let mut actions = Vec::with_capacity(cfg.steps);
    let mut resets = Vec::new();
    let mut history: VecDeque<Vec<CpmState>> =
        std::iter::repeat_n(states[0].clone(), latency + 1).collect();
    let mut queues: Vec<VecDeque<ActionCmd>> = truth
        .iter()
        .map(|s| std::iter::repeat_n(ActionCmd::new(s.speed(), s.steering), delay).collect())
        .collect();
    let mut hysteresis = vec![Hysteresis::default(); n * n.saturating_sub(1) / 2];
    let mut last_clear = truth.clone();
    let soft_deadline = Duration::from_secs_f64(2.0 * cfg.dt);
    let mut late_responses = 0;

    planner.begin(&Session {
        cfg,
        map,
        reference_paths: &names,
    })?;

    for t in 0..cfg.steps {
        let now = t as f64 * cfg.dt;
        let aged = &history[0];
        let observed = aged
            .iter()
            .zip(observers.iter_mut())
            .map(|(s, o)| o.perturb(s, pos_std, yaw_std))
            .collect();
        let tick = TickRequest {
            step: t,
            time: now,
            agents: observed,
        };
        let asked = Instant::now();
        let plans = planner.plan(&tick)?;
        if asked.elapsed() > soft_deadline {
            late_responses += 1;
            log::warn!("step {t}: planner answered after {:?}", asked.elapsed());
        }
        validate_plans(&plans, cfg, n, now)?;

        let mut applied = Vec::with_capacity(n);
        for i in 0..n {
            let cmd = match cfg.mode {
                ExecutionMode::Direct => plans[i].implied_command(0),
                ExecutionMode::Follow => {
                    // The follower knows its own actuator queue: it tracks the
                    // reference at the time its command will take effect, from
                    // the state the queued commands will have produced by then.
                    let mut ahead = truth[i];
                    for queued in &queues[i] {
                        ahead = step_bicycle_substeps(
                            &ahead,
                            queued,
                            cfg.dt,
                            params,
                            cfg.integrator_substeps,
                        );
                    }
                    let effective = now + queues[i].len() as f64 * cfg.dt;
                    follow_step(&ahead, &plans[i], effective, params, &cfg.follower)?
                }
            };
            queues[i].push_back(cmd);
            let cmd = queues[i]
                .pop_front()
                .expect("queue holds at least the new command");
            truth[i] =
                step_bicycle_substeps(&truth[i], &cmd, cfg.dt, params, cfg.integrator_substeps);
            applied.push(cmd);
        }
        actions.push(applied);

        let mut row = log_row(&truth);
        if cfg.reset_on_collision {
            let mut involved = vec![false; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let overlap = overlapping(&row[i], &row[j], params);
                    if let Some(Transition::Started { .. }) =
                        hysteresis[pair_index(n, i, j)].push(t + 1, overlap)
                    {
                        involved[i] = true;
                        involved[j] = true;
                    }
                }
            }
            for i in (0..n).filter(|&i| involved[i]) {
                let pose = find_respawn(i, &last_clear[i], &row, paths[i], cfg, map)?;
                truth[i] = pose;
                row[i] = map_sigma_to_cpm(&pose, params);
                queues[i].iter_mut().for_each(|c| *c = ActionCmd::default());
                for j in (0..n).filter(|&j| j != i) {
                    hysteresis[pair_index(n, i.min(j), i.max(j))] = Hysteresis::default();
                }
                resets.push(ResetEvent {
                    step: t + 1,
                    agent: i,
                    x: pose.position.x,
                    y: pose.position.y,
                    yaw: pose.yaw,
                });
                log::debug!("step {}: agent {i} respawned", t + 1);
            }
            for i in 0..n {
                if (0..n).all(|j| j == i || !overlapping(&row[i], &row[j], params)) {
                    last_clear[i] = truth[i];
                }
            }
        }

        history.push_back(row.clone());
        history.pop_front();
        states.push(row);
    }
    planner.end()?;

    Ok(RunRecord {
        config: cfg.clone(),
        reference_paths: names,
        states,
        actions,
        resets,
        wall_clock: WallClock {
            elapsed: started.elapsed(),
            late_responses,
        },
    })
}
