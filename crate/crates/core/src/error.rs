use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (shape, domain, range).
    #[error("invalid input: {0}")]
    Input(String),

    /// A matrix that must be invertible is singular or too ill-conditioned.
    #[error("singular matrix: {reason} (condition estimate {condition:.3e})")]
    Singular { reason: String, condition: f64 },

    /// NaN or Inf appeared during an evaluation.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Rejection sampling gave up.
    #[error("generation failed after {attempts} attempts (acceptance rate {acceptance_rate:.4})")]
    Generation { attempts: usize, acceptance_rate: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
