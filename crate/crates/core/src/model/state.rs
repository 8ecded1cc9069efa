use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};

/// Agent state as the lab's state list reports it: scalar speed and a
/// steering angle normalized to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmState {
    pub position: Vec2,
    pub yaw: f64,
    pub speed: f64,
    pub steering_normalized: f64,
}

impl CpmState {
    pub fn new(position: Vec2, yaw: f64, speed: f64, steering_normalized: f64) -> Self {
        CpmState {
            position,
            yaw: wrap_angle(yaw),
            speed,
            steering_normalized: steering_normalized.clamp(-1.0, 1.0),
        }
    }
}

/// Agent state in the planner's internal representation: global-frame
/// velocity vector and steering angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaState {
    pub position: Vec2,
    pub yaw: f64,
    pub velocity: Vec2,
    pub steering: f64,
}

impl SigmaState {
    pub fn new(position: Vec2, yaw: f64, velocity: Vec2, steering: f64) -> Self {
        SigmaState {
            position,
            yaw: wrap_angle(yaw),
            velocity,
            steering,
        }
    }

    pub fn at_rest(position: Vec2, yaw: f64) -> Self {
        SigmaState::new(position, yaw, Vec2::ZERO, 0.0)
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Commanded speed (m/s) and steering angle (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCmd {
    pub speed: f64,
    pub steering: f64,
}

impl ActionCmd {
    pub const fn new(speed: f64, steering: f64) -> Self {
        ActionCmd { speed, steering }
    }
}
