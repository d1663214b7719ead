use thiserror::Error;

/// Errors raised by the simulator and its oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("placement infeasible: {0}")]
    PlacementInfeasible(String),

    #[error("non-finite input to model")]
    NonFiniteInput,

    #[error("input length {got} does not match model input size {expected}")]
    InputLength { expected: usize, got: usize },

    #[error("empty minibatch")]
    EmptyBatch,

    #[error("cannot sample from an empty replay memory")]
    EmptyMemory,

    #[error("pattern index {index} out of range for {channels} channels")]
    PatternOutOfRange { index: usize, channels: usize },

    #[error("LAP {0} is not in the active set")]
    NotActive(usize),

    #[error("instance too large for exhaustive evaluation: {0}")]
    TooLarge(String),

    #[error("access distribution row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },

    #[error("inconsistent layer vector: {0}")]
    LayerVector(String),

    #[error("empty set: {0}")]
    Empty(&'static str),

    #[error("invalid sweep axis `{0}`")]
    InvalidAxis(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        field,
        reason: reason.into(),
    }
}
