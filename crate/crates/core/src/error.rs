use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrator blowup at t = {time}{}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    Blowup { time: f64, seed: Option<u64> },

    #[error("numerical inconsistency in {what}: imaginary residue {residue:e}")]
    NumericalInconsistency { what: &'static str, residue: f64 },

    #[error("histogram grids differ")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("master-equation oracle failure at t = {time}: {reason}")]
    OracleFailure { time: f64, reason: String },

    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Attach the trajectory seed to a blowup error.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Error::Blowup { time, .. } => Error::Blowup {
                time,
                seed: Some(seed),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
