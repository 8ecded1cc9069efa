use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A map document that parsed but describes invalid geometry or topology.
    #[error("map validation failed: {0}")]
    MapValidation(String),

    /// A configuration value outside its allowed range.
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("action component {value} outside (-1, 1)")]
    ActionOutOfRange { value: f64 },

    #[error("agent {agent} reached the end of its reference path")]
    PathExhausted { agent: usize },

    #[error("policy failure: {0}")]
    Policy(String),

    #[error("step {index} outside the rules-based segment [{h_c}, {h_p})")]
    TaperIndex {
        index: usize,
        h_c: usize,
        h_p: usize,
    },

    #[error("trajectory does not cover t={now} (t0={t0}, end={end})")]
    TrajectoryExpired { now: f64, t0: f64, end: f64 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },

    #[error("planner timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unknown run: {0}")]
    UnknownRun(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    /// Errors a planner or transport raised while an episode was in progress.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            Error::Protocol(_) | Error::VersionMismatch { .. } | Error::Timeout(_)
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::MapValidation(_) | Error::Constraint(_)
        )
    }
}
