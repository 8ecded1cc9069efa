use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::angle::deserialize_angle;
use super::params::VehicleParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// The first planned action drives the vehicle model directly.
    Direct,
    /// A trajectory follower tracks the planned reference.
    Follow,
}

/// How the planner extrapolates other agents during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerPrediction {
    Frozen,
    ConstantVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceToggles {
    pub position_noise: bool,
    pub yaw_noise: bool,
    pub actuation_delay: bool,
    pub localization_latency: bool,
}

impl Default for DisturbanceToggles {
    fn default() -> Self {
        DisturbanceToggles {
            position_noise: true,
            yaw_noise: true,
            actuation_delay: true,
            localization_latency: true,
        }
    }
}

/// Imperfections injected between the ground truth and what the planner sees
/// or the actuators receive. Magnitudes in the presets are calibration knobs,
/// not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceProfile {
    pub obs_position_noise_std: f64,
    #[serde(deserialize_with = "deserialize_angle")]
    pub obs_yaw_noise_std: f64,
    /// Commands wait this many ticks before reaching the vehicle.
    pub actuation_delay: usize,
    /// The state list is this many ticks old.
    pub localization_latency: usize,
    pub enabled: DisturbanceToggles,
    pub noise_seed: u64,
}

impl Default for DisturbanceProfile {
    fn default() -> Self {
        DisturbanceProfile::sim()
    }
}

impl DisturbanceProfile {
    /// No disturbances.
    pub fn sim() -> Self {
        DisturbanceProfile {
            obs_position_noise_std: 0.0,
            obs_yaw_noise_std: 0.0,
            actuation_delay: 0,
            localization_latency: 0,
            enabled: DisturbanceToggles::default(),
            noise_seed: 0,
        }
    }

    /// One tick of actuation delay and 2 mm position noise.
    pub fn twin() -> Self {
        DisturbanceProfile {
            obs_position_noise_std: 0.002,
            actuation_delay: 1,
            ..Self::sim()
        }
    }

    /// Two ticks of actuation delay, one tick of localization latency, 5 mm
    /// position noise and 0.5 degree yaw noise.
    pub fn lab() -> Self {
        DisturbanceProfile {
            obs_position_noise_std: 0.005,
            obs_yaw_noise_std: 0.5 * std::f64::consts::PI / 180.0,
            actuation_delay: 2,
            localization_latency: 1,
            ..Self::sim()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sim" => Some(Self::sim()),
            "twin" => Some(Self::twin()),
            "lab" => Some(Self::lab()),
            _ => None,
        }
    }

    pub fn position_noise(&self) -> f64 {
        if self.enabled.position_noise {
            self.obs_position_noise_std
        } else {
            0.0
        }
    }

    pub fn yaw_noise(&self) -> f64 {
        if self.enabled.yaw_noise {
            self.obs_yaw_noise_std
        } else {
            0.0
        }
    }

    pub fn delay(&self) -> usize {
        if self.enabled.actuation_delay {
            self.actuation_delay
        } else {
            0
        }
    }

    pub fn latency(&self) -> usize {
        if self.enabled.localization_latency {
            self.localization_latency
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stds = [self.obs_position_noise_std, self.obs_yaw_noise_std];
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Constraint(
                "disturbance: noise standard deviations must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DisturbanceRepr {
    Preset(String),
    Profile(DisturbanceProfile),
}

pub fn deserialize_disturbance<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<DisturbanceProfile, D::Error> {
    match DisturbanceRepr::deserialize(d)? {
        DisturbanceRepr::Profile(p) => Ok(p),
        DisturbanceRepr::Preset(name) => DisturbanceProfile::preset(&name).ok_or_else(|| {
            serde::de::Error::custom(format!("unknown disturbance preset {name:?}"))
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerGains {
    /// How far ahead on the reference (seconds) the steering law aims.
    pub lookahead_time: f64,
    /// Proportional gain on the speed error.
    pub k_s: f64,
}

impl Default for FollowerGains {
    fn default() -> Self {
        FollowerGains {
            lookahead_time: 0.3,
            k_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(deserialize_with = "deserialize_angle")]
    pub yaw: f64,
}

/// Initial placement of one agent: either an arc position on its reference
/// path (heading taken from the path) or an explicit pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPlacement {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default)]
    pub speed: f64,
}

impl AgentPlacement {
    pub fn on_path(path: impl Into<String>, s: f64) -> Self {
        AgentPlacement {
            path: path.into(),
            s: Some(s),
            pose: None,
            speed: 0.0,
        }
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = speed;
        self
    }
}

/// Everything that determines one episode, apart from the map and the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dt: f64,
    pub steps: usize,
    pub n_agent: usize,
    #[serde(rename = "H_c")]
    pub h_c: usize,
    #[serde(rename = "H_p")]
    pub h_p: usize,
    pub mode: ExecutionMode,
    #[serde(deserialize_with = "deserialize_disturbance")]
    pub disturbance: DisturbanceProfile,
    pub seed: u64,
    /// Empty means: spread `n_agent` agents evenly along the map's first reference path.
    pub placements: Vec<AgentPlacement>,
    pub reset_on_collision: bool,
    pub vehicle: VehicleParams,
    pub peer_prediction: PeerPrediction,
    pub follower: FollowerGains,
    pub integrator_substeps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: 0.1,
            steps: 180,
            n_agent: 3,
            h_c: 5,
            h_p: 8,
            mode: ExecutionMode::Direct,
            disturbance: DisturbanceProfile::sim(),
            seed: 0,
            placements: Vec::new(),
            reset_on_collision: true,
            vehicle: VehicleParams::default(),
            peer_prediction: PeerPrediction::ConstantVelocity,
            follower: FollowerGains::default(),
            integrator_substeps: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::Constraint(msg))
            }
        };
        check(
            self.dt.is_finite() && self.dt > 0.0,
            format!("dt must be > 0, got {}", self.dt),
        )?;
        check(self.steps >= 1, "steps must be >= 1".into())?;
        check(self.n_agent >= 1, "n_agent must be >= 1".into())?;
        check(
            1 <= self.h_c && self.h_c <= self.h_p,
            format!(
                "need 1 <= H_c <= H_p, got H_c={} H_p={}",
                self.h_c, self.h_p
            ),
        )?;
        check(
            self.placements.is_empty() || self.placements.len() == self.n_agent,
            format!(
                "{} placements given for {} agents",
                self.placements.len(),
                self.n_agent
            ),
        )?;
        for (i, p) in self.placements.iter().enumerate() {
            check(
                !(p.s.is_some() && p.pose.is_some()),
                format!("placement {i}: give either s or pose, not both"),
            )?;
            check(
                p.speed >= 0.0 && p.speed <= self.vehicle.max_speed,
                format!("placement {i}: speed outside [0, max_speed]"),
            )?;
        }
        check(
            self.mode == ExecutionMode::Direct || self.disturbance.delay() <= self.h_p,
            format!(
                "follow mode needs actuation_delay <= H_p, got {} > {}",
                self.disturbance.delay(),
                self.h_p
            ),
        )?;
        check(
            self.integrator_substeps >= 1,
            "integrator_substeps must be >= 1".into(),
        )?;
        check(
            self.follower.lookahead_time >= 0.0 && self.follower.k_s >= 0.0,
            "follower gains must be >= 0".into(),
        )?;
        self.vehicle.validate()?;
        self.disturbance.validate()
    }
}
