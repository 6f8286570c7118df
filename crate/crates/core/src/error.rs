use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("level {level} out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("solver failure at level {level}: {reason} (theta = {theta:?})")]
    Solver {
        level: usize,
        reason: String,
        theta: Vec<f64>,
    },

    #[error("divergence at iteration {iteration}, particle {particle}")]
    Divergence { iteration: usize, particle: usize },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(theta: &[f64]) -> Result<()> {
    if theta.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input("non-finite parameter vector".into()))
    }
}
