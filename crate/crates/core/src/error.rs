use thiserror::Error;

use crate::time::TimeStamp;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operands live on different spaces")]
    SpaceMismatch,

    #[error("subsystem `{0}` appears in more than one factor")]
    OverlappingSubsystems(String),

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("subsystem `{name}`: {reason}")]
    BadSubsystem { name: String, reason: String },

    #[error("unknown basis label `{label}` for subsystem `{subsystem}`")]
    UnknownLabel { subsystem: String, label: String },

    #[error("expected {expected} amplitudes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite amplitude")]
    NonFinite,

    /// A projection whose Born weight vanishes.
    #[error("impossible branch (probability {probability:e})")]
    ImpossibleBranch { probability: f64 },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    Unnormalized { norm_sqr: f64 },

    #[error("operator is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("operator is not a projector (max deviation {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("not an isometry: {0}")]
    NotIsometry(String),

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("incomplete measurement `{name}` (outcome probabilities sum to {total})")]
    IncompleteMeasurement { name: String, total: f64 },

    #[error("measurement `{name}`: {reason}")]
    BadMeasurement { name: String, reason: String },

    #[error("ledger of `{agent}` has no state at or before {time}")]
    EmptyLedger { agent: String, time: TimeStamp },

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("unresolved reference: {0}")]
    Unresolved(String),

    #[error("{0}")]
    Invalid(String),
}
