use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cholesky factorization failed after {retries} jitter retries")]
    CholeskyFailure { retries: u32 },

    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("bernoulli mean {0} is outside [0, 1]")]
    MeanOutOfRange(f64),

    #[error("engine {engine} cannot represent this problem: {reason}")]
    IncompatibleEngine {
        engine: &'static str,
        reason: String,
    },

    #[error("all posterior weights vanished after observing y = {y}")]
    DegenerateWeights { y: f64 },

    #[error("action set is empty")]
    EmptyActionSet,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{failed} of {total} replications failed (budget is 1%): {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
