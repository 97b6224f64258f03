use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Iterate state at the moment a run was aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub iteration: u64,
    pub coords: Vec<f64>,
    /// Oracle queries issued up to and including the aborted step (0 for flows).
    pub queries_used: u64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("iterates diverged at iteration {} (|coord| > 1e15 or non-finite)", .0.iteration)]
    Diverged(DivergenceReport),

    #[error("proximal inner solve did not reach tolerance {tol:e} within {budget} iterations (residual {residual:e})")]
    PpmNotConverged { budget: usize, tol: f64, residual: f64 },

    #[error("problem `{problem}` does not support {what}")]
    Unsupported { problem: String, what: &'static str },

    #[error("time {t} outside recorded range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("explicit step sequence has {len} entries but iteration {n} was requested")]
    ScheduleExhausted { n: u64, len: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
