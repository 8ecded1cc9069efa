//! Domain types shared by every stage of the pipeline: vehicle parameters,
//! agent states, the lane map, and run configuration.

mod angle;
mod config;
mod map;
mod params;
mod state;

pub use angle::{deserialize_angle, parse_angle};
pub use config::{
    deserialize_disturbance, AgentPlacement, DisturbanceProfile, DisturbanceToggles, ExecutionMode,
    FollowerGains, PeerPrediction, Pose, RunConfig,
};
pub use map::{Lanelet, MapDocument, MapModel, ReferencePath};
pub use params::VehicleParams;
pub use state::{ActionCmd, CpmState, SigmaState};
