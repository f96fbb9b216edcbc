use thiserror::Error;

/// Errors raised by the library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantization grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty minibatch at step {step}")]
    EmptyBatch { step: u64 },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate { step: u64 },

    #[error("iterate diverged at step {step}: max |w| = {norm} exceeds {bound}")]
    Diverged { step: u64, norm: f64, bound: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_) | Error::Config(_) | Error::Toml(_) | Error::Dimension { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
