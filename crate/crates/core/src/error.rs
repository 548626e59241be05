use thiserror::Error;

/// Errors produced by model construction, assembly and the spectral kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("energy must be finite, got {0}")]
    NonFiniteEnergy(f64),

    #[error("window holds {found} eigenvalues, more than the allowed {max}")]
    TooManyEigenvalues { found: usize, max: usize },

    #[error("inverse iteration did not converge near {shift} (residual {residual:e})")]
    NoConvergence { shift: f64, residual: f64 },

    #[error("dense solve refused: dimension {0} exceeds {1}")]
    TooLarge(usize, usize),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("realization {realization} (master seed {seed}) failed: {message}")]
    Realization {
        seed: u64,
        realization: u64,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
