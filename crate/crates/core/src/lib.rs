//! Deterministic multi-agent motion-planning simulator and zero-shot
//! benchmark harness for small-scale connected vehicles.
//!
//! The pipeline: a [`policy::Policy`] proposes actions, the [`planner`] rolls
//! them into reference trajectories, the [`executor`] advances the vehicles
//! in lockstep ticks, [`metrics`] scores the recorded ground truth, and
//! [`bench`] runs and aggregates whole evaluation matrices.

pub mod bench;
pub mod dynamics;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod policy;

pub use error::{Error, Result};
pub use executor::{run_episode, InProcessPlanner, PlannerBinding, RunRecord};
pub use geometry::Vec2;
pub use metrics::{evaluate, MetricOptions, RunMetrics};
pub use model::{
    ActionCmd, CpmState, DisturbanceProfile, ExecutionMode, MapModel, RunConfig, SigmaState,
    VehicleParams,
};
pub use planner::{generate_trajectory, ReferenceTrajectory, Trajectory};
pub use policy::{ConstantPolicy, Policy, PurePursuitPolicy, RandomPolicy};
