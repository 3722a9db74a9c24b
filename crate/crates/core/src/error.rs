use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("quaternion norm {norm} is not unit within tolerance")]
    NonUnitQuaternion { norm: f64 },

    /// The derivative bounds admit no velocity sequence from the given start.
    #[error("infeasible bounds on joint {joint}: {reason}")]
    Infeasible { joint: usize, reason: String },

    /// Every sample in a batch evaluated to an infinite (or NaN) cost.
    #[error("degenerate batch: all {count} costs are infinite")]
    DegenerateBatch { count: usize },

    #[error("phase {phase} does not belong to a {task} task")]
    PhaseMismatch { phase: String, task: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
