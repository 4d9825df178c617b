use thiserror::Error;

/// Errors raised by the approximation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (bad names, radii, parameters).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Rejection sampler gave up on a point.
    #[error(
        "rejection sampling budget exhausted after {attempts} attempts \
         ({accepted} accepted, empirical acceptance rate {rate:.3e})"
    )]
    SamplingBudget {
        attempts: u64,
        accepted: u64,
        rate: f64,
    },

    /// The K×N matrix B is numerically rank deficient.
    #[error("matrix B is not of full rank: sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}")]
    FullRankFailure { sigma_min: f64, sigma_max: f64 },

    /// The least-squares matrix A is numerically rank deficient or undersampled.
    #[error("least-squares solve failed: {reason} (sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e})")]
    SolveFailure {
        reason: String,
        sigma_min: f64,
        sigma_max: f64,
    },

    /// Bad data such as a non-finite function value.
    #[error("data error: {0}")]
    Data(String),

    /// An internal invariant was violated.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (rank, solve, sampling).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FullRankFailure { .. } | Error::SolveFailure { .. } | Error::SamplingBudget { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.position() {
            Some(pos) => Error::Csv(format!("line {}: {}", pos.line(), err)),
            None => Error::Csv(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
