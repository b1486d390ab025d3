use thiserror::Error;

/// Errors raised by the certification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trajectory `{traj_id}` (line {line}) rejected: {reason}")]
    RejectedTrajectory {
        traj_id: String,
        line: usize,
        reason: String,
    },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("N = {got} samples is below the required minimum of {required}")]
    InsufficientSamples { got: usize, required: usize },

    #[error("enumerating {count} mode products exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("solver hit its iteration limit ({0} Newton steps)")]
    IterationLimit(usize),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical solvers, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::IterationLimit(_) | Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
