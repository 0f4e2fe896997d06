use thiserror::Error;

/// Errors raised by the numerical layer and the verification suites.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ill-posed: {0}")]
    IllPosed(String),

    #[error("quadrature did not converge: achieved error {achieved:e} against tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sheet of {cells} cells exceeds the memory budget of {budget} cells")]
    Resource { cells: usize, budget: usize },

    #[error("instability at z = {z}: non-finite state (spectral radius estimate {spectral_radius:.3e})")]
    Instability { z: f64, spectral_radius: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the caller's inputs rather than by the computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config(_) | Error::IllPosed(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
