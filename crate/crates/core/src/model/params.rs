use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::angle::deserialize_angle;
use crate::error::{Error, Result};

/// Geometry and actuation limits of one vehicle.
///
/// Defaults describe the 1:18-scale lab car: 0.22 m x 0.107 m body,
/// 0.15 m wheelbase with the center of gravity at mid-wheelbase, 31 degree
/// steering lock, 90 degree/s steering rate, +-5 m/s^2 acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub rear_wheelbase: f64,
    #[serde(deserialize_with = "deserialize_angle")]
    pub max_steering: f64,
    #[serde(deserialize_with = "deserialize_angle")]
    pub max_steering_rate: f64,
    pub max_accel: f64,
    pub min_accel: f64,
    pub max_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            length: 0.22,
            width: 0.107,
            wheelbase: 0.15,
            rear_wheelbase: 0.075,
            max_steering: 31.0 * PI / 180.0,
            max_steering_rate: 90.0 * PI / 180.0,
            max_accel: 5.0,
            min_accel: -5.0,
            max_speed: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Constraint(format!("vehicle: {msg}")))
            }
        };
        check(self.length > 0.0, "length must be positive")?;
        check(self.width > 0.0, "width must be positive")?;
        check(
            0.0 < self.rear_wheelbase
                && self.rear_wheelbase < self.wheelbase
                && self.wheelbase <= self.length,
            "need 0 < rear_wheelbase < wheelbase <= length",
        )?;
        check(
            self.max_steering > 0.0 && self.max_steering < std::f64::consts::FRAC_PI_2,
            "max_steering must lie in (0, pi/2)",
        )?;
        check(
            self.max_steering_rate > 0.0,
            "max_steering_rate must be positive",
        )?;
        check(
            self.min_accel < 0.0 && 0.0 < self.max_accel,
            "need min_accel < 0 < max_accel",
        )?;
        check(self.max_speed > 0.0, "max_speed must be positive")
    }

    /// Ratio of rear wheelbase to wheelbase, the lever arm in the slip-angle formula.
    pub fn slip_ratio(&self) -> f64 {
        self.rear_wheelbase / self.wheelbase
    }

    /// Largest slip angle reachable at full steering lock.
    pub fn max_slip(&self) -> f64 {
        (self.slip_ratio() * self.max_steering.tan()).atan()
    }
}
