use thiserror::Error;

/// Errors produced by the formulas, oracles and simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mutation rate {0}: must lie strictly between 0 and 1")]
    InvalidRate(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("schedule has {got} rates but the problem has {expected} fitness levels")]
    ScheduleLength { expected: usize, got: usize },

    #[error("{what} = {value} exceeds the limit of {limit}; {hint}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
