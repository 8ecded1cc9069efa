//! Policy contract and the built-in reference policies.
//!
//! A policy maps the global state of all agents to a squashed action in
//! `(-1, 1)^2`; the planner rescales it to physical units. Learned policies
//! attach over the wire protocol instead of implementing this trait.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::unscale_action;
use crate::error::{Error, Result};
use crate::geometry::{project_onto_polyline_aligned, wrap_angle, Polyline};
use crate::model::{ActionCmd, MapModel, ReferencePath, SigmaState, VehicleParams};

pub struct PolicyInput<'a> {
    pub ego_index: usize,
    pub states: &'a [SigmaState],
    pub map: &'a MapModel,
    pub reference_path: &'a ReferencePath,
    pub params: &'a VehicleParams,
    /// The only mutable state a policy may touch.
    pub rng: &'a mut ChaCha8Rng,
}

impl PolicyInput<'_> {
    pub fn ego(&self) -> &SigmaState {
        &self.states[self.ego_index]
    }
}

pub trait Policy: Send + Sync {
    /// Returns the squashed action; both components strictly inside `(-1, 1)`.
    fn act(&self, input: &mut PolicyInput<'_>) -> Result<[f64; 2]>;
}

/// Always commands the same fraction of max speed and of max steering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPolicy {
    pub speed_fraction: f64,
    #[serde(default)]
    pub steering_fraction: f64,
}

impl ConstantPolicy {
    pub fn new(speed_fraction: f64) -> Self {
        ConstantPolicy {
            speed_fraction,
            steering_fraction: 0.0,
        }
    }
}

impl Policy for ConstantPolicy {
    fn act(&self, _input: &mut PolicyInput<'_>) -> Result<[f64; 2]> {
        const LIMIT: f64 = 1.0 - 1e-12;
        Ok([
            (2.0 * self.speed_fraction - 1.0).clamp(-LIMIT, LIMIT),
            self.steering_fraction.clamp(-LIMIT, LIMIT),
        ])
    }
}

/// Uniform noise in `(-0.99, 0.99)` drawn from the input's stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, input: &mut PolicyInput<'_>) -> Result<[f64; 2]> {
        Ok([
            input.rng.random_range(-0.99..0.99),
            input.rng.random_range(-0.99..0.99),
        ])
    }
}

/// Geometric path tracker on the agent's reference path; a scripted stand-in
/// for a learned actor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurePursuitPolicy {
    /// Arc distance (m) from the projected position to the aim point.
    pub lookahead: f64,
    pub target_speed: f64,
}

impl Default for PurePursuitPolicy {
    fn default() -> Self {
        PurePursuitPolicy {
            lookahead: 0.3,
            target_speed: 0.75,
        }
    }
}

impl Policy for PurePursuitPolicy {
    fn act(&self, input: &mut PolicyInput<'_>) -> Result<[f64; 2]> {
        let cmd = pure_pursuit_act(
            input.ego(),
            &input.reference_path.polyline,
            self.lookahead,
            self.target_speed,
            input.params,
        )
        .map_err(|e| match e {
            Error::PathExhausted { .. } => Error::PathExhausted {
                agent: input.ego_index,
            },
            other => other,
        })?;
        Ok(unscale_action(&cmd, input.params))
    }
}

/// Serializable choice of built-in policy, as named in matrices and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicySpec {
    Constant(ConstantPolicy),
    Pursuit(PurePursuitPolicy),
    Random,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Pursuit(PurePursuitPolicy::default())
    }
}

impl PolicySpec {
    /// Defaults for a bare name: `constant` drives straight at 75 % speed.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(PolicySpec::Constant(ConstantPolicy::new(0.75))),
            "pursuit" => Some(PolicySpec::Pursuit(PurePursuitPolicy::default())),
            "random" => Some(PolicySpec::Random),
            _ => None,
        }
    }

    pub fn build(&self) -> Box<dyn Policy> {
        match *self {
            PolicySpec::Constant(p) => Box::new(p),
            PolicySpec::Pursuit(p) => Box::new(p),
            PolicySpec::Random => Box::new(RandomPolicy),
        }
    }
}

/// Weight (m) of the heading term when picking the tracked path segment.
/// Keeps the tracker on its own branch where a path crosses itself.
const ALIGNMENT_WEIGHT: f64 = 0.5;

/// Steering angle that puts the rear axle on a circle through a point at
/// bearing `alpha` (body frame) and distance `distance`, clamped to the lock.
pub fn pure_pursuit_steering(alpha: f64, distance: f64, params: &VehicleParams) -> f64 {
    if distance <= 1e-12 {
        return 0.0;
    }
    (2.0 * params.wheelbase * alpha.sin() / distance)
        .atan()
        .clamp(-params.max_steering, params.max_steering)
}

pub fn pure_pursuit_act(
    state: &SigmaState,
    path: &Polyline,
    lookahead: f64,
    target_speed: f64,
    params: &VehicleParams,
) -> Result<ActionCmd> {
    if lookahead.is_nan() || lookahead <= 0.0 {
        return Err(Error::Constraint(format!(
            "lookahead must be > 0, got {lookahead}"
        )));
    }
    let proj = project_onto_polyline_aligned(state.position, state.yaw, ALIGNMENT_WEIGHT, path);
    if !path.is_closed() && proj.arc_length >= path.length() - 1e-9 {
        return Err(Error::PathExhausted { agent: 0 });
    }
    let target = path.point_at(proj.arc_length + lookahead);
    let to_target = target - state.position;
    let alpha = wrap_angle(to_target.angle() - state.yaw);
    Ok(ActionCmd::new(
        target_speed,
        pure_pursuit_steering(alpha, to_target.norm(), params),
    ))
}
