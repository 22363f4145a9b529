use thiserror::Error;

/// Errors raised by the rate-region toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("{0} is singular")]
    Singular(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("degenerate enhancement: {0}")]
    DegenerateEnhancement(String),

    #[error(
        "split is not stationary: KKT residuals ({eq3:e}, {eq3_1:e}) exceed threshold {threshold:e}"
    )]
    NonStationary {
        eq3: f64,
        eq3_1: f64,
        threshold: f64,
    },
}

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::Singular(_) => "singular",
            Error::Unsupported(_) => "unsupported",
            Error::DegenerateEnhancement(_) => "degenerate-enhancement",
            Error::NonStationary { .. } => "non-stationary",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
