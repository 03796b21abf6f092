use thiserror::Error;

/// Errors produced by the model builders, the bound computations, the
/// estimator and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what} is rank deficient (smallest/largest singular value = {ratio:e})")]
    RankDeficient { what: &'static str, ratio: f64 },

    #[error("{which} is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { which: &'static str, condition: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("subspace solver degenerate: two smallest eigenvalues {0:e} and {1:e} coincide")]
    SolverDegenerate(f64, f64),

    #[error("anchor tap estimate is zero (|h_hat[d]| = {0:e})")]
    ZeroAnchorTap(f64),

    #[error("unsupported modulation: {0}")]
    UnsupportedModulation(String),

    #[error("zero-padding reference bound requires a ZP precoder, got {0}")]
    NotZeroPadded(String),

    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("cell at {snr_db} dB failed: {excluded} of {total} trials excluded ({first_error})")]
    CellFailed {
        snr_db: f64,
        excluded: usize,
        total: usize,
        first_error: String,
    },

    #[error("{} experiment cell(s) failed: {}", .0.len(), .0.join("; "))]
    CellsFailed(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
