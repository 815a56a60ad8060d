use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Non-finite coefficients appeared while stepping.
    #[error("numerical divergence detected at step {step}")]
    Divergence { step: usize },

    #[error("config error: {0}")]
    Config(String),

    /// Unreadable or inconsistent reference cache file; recompute to recover.
    #[error("cache error in {}: {reason}", path.display())]
    Cache { path: PathBuf, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
