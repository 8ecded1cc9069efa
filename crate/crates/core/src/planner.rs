//! Receding-horizon trajectory generation without optimization.
//!
//! For the first `H_c` steps the policy is queried on predicted states and its
//! actions are rolled through the vehicle model. For the remaining steps up to
//! `H_p` the last commanded speed is held and the last commanded steering is
//! tapered linearly so that the final action steers straight.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rescale_action, step_bicycle_substeps};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::model::{ActionCmd, MapModel, PeerPrediction, ReferencePath, RunConfig, SigmaState};
use crate::policy::{Policy, PolicyInput};

/// Predicted states and the commands that produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    /// `H_p + 1` states; index 0 is the state the rollout started from.
    pub states: Vec<SigmaState>,
    /// `H_p` commands; `states[j + 1]` follows from `states[j]` and `actions[j]`.
    pub actions: Vec<ActionCmd>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn to_reference(&self) -> ReferenceTrajectory {
        ReferenceTrajectory {
            t0: self.t0,
            dt: self.dt,
            points: self
                .states
                .iter()
                .map(TrajectoryPoint::from_state)
                .collect(),
        }
    }
}

/// One sample of a reference trajectory as it travels over the wire.
/// `steer` is in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub steer: f64,
}

impl TrajectoryPoint {
    pub fn from_state(s: &SigmaState) -> Self {
        TrajectoryPoint {
            x: s.position.x,
            y: s.position.y,
            yaw: s.yaw,
            speed: s.speed(),
            steer: s.steering,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Time-stamped state samples at a fixed stride, the form in which the
/// executor consumes plans regardless of where they were computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub points: Vec<TrajectoryPoint>,
}

impl ReferenceTrajectory {
    pub fn end_time(&self) -> f64 {
        self.t0 + (self.points.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Command that moves the vehicle from sample `j` to sample `j + 1`.
    pub fn implied_command(&self, j: usize) -> ActionCmd {
        let p = &self.points[(j + 1).min(self.points.len() - 1)];
        ActionCmd::new(p.speed, p.steer)
    }
}

/// Linearly tapered steering for rules-based step `j` in `[H_c, H_p)`;
/// reaches exactly 0 at `j = H_p - 1`.
pub fn taper_steering(u_last: f64, j: usize, h_c: usize, h_p: usize) -> Result<f64> {
    if j < h_c || j >= h_p {
        return Err(Error::TaperIndex { index: j, h_c, h_p });
    }
    Ok(u_last * (h_p - 1 - j) as f64 / (h_p - h_c) as f64)
}

/// Straight-line extrapolation at constant speed with the wheels centered.
fn predict_peer(s: &SigmaState, dt: f64) -> SigmaState {
    let dir = Vec2::from_angle(s.yaw);
    let speed = s.speed();
    SigmaState::new(s.position + dir * (speed * dt), s.yaw, dir * speed, 0.0)
}

pub struct PlanRequest<'a> {
    pub ego_index: usize,
    pub states: &'a [SigmaState],
    pub map: &'a MapModel,
    pub reference_path: &'a ReferencePath,
    pub cfg: &'a RunConfig,
    pub t0: f64,
}

pub fn generate_trajectory(
    policy: &dyn Policy,
    req: &PlanRequest<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let cfg = req.cfg;
    let params = &cfg.vehicle;
    let mut world = req.states.to_vec();
    let mut ego = world[req.ego_index];
    let mut states = Vec::with_capacity(cfg.h_p + 1);
    let mut actions = Vec::with_capacity(cfg.h_p);
    states.push(ego);
    let mut last = ActionCmd::default();

    for j in 0..cfg.h_p {
        let cmd = if j < cfg.h_c {
            world[req.ego_index] = ego;
            let mut input = PolicyInput {
                ego_index: req.ego_index,
                states: &world,
                map: req.map,
                reference_path: req.reference_path,
                params,
                rng: &mut *rng,
            };
            let raw = policy.act(&mut input)?;
            last = rescale_action(raw, params)?;
            last
        } else {
            ActionCmd::new(
                last.speed,
                taper_steering(last.steering, j, cfg.h_c, cfg.h_p)?,
            )
        };
        ego = step_bicycle_substeps(&ego, &cmd, cfg.dt, params, cfg.integrator_substeps);
        states.push(ego);
        actions.push(cmd);
        if cfg.peer_prediction == PeerPrediction::ConstantVelocity {
            for (i, s) in world.iter_mut().enumerate() {
                if i != req.ego_index {
                    *s = predict_peer(s, cfg.dt);
                }
            }
        }
    }
    Ok(Trajectory {
        t0: req.t0,
        dt: cfg.dt,
        states,
        actions,
    })
}

/// Trajectory that brings the vehicle to a stop with the wheels straight.
pub fn stopping_trajectory(state: &SigmaState, cfg: &RunConfig, t0: f64) -> Trajectory {
    let mut states = vec![*state];
    let mut actions = Vec::with_capacity(cfg.h_p);
    let mut s = *state;
    for _ in 0..cfg.h_p {
        let cmd = ActionCmd::new(0.0, 0.0);
        s = step_bicycle_substeps(&s, &cmd, cfg.dt, &cfg.vehicle, cfg.integrator_substeps);
        states.push(s);
        actions.push(cmd);
    }
    Trajectory {
        t0,
        dt: cfg.dt,
        states,
        actions,
    }
}
