use thiserror::Error;

/// Errors surfaced by the reconstruction engine and its support modules.
#[derive(Debug, Error)]
pub enum SrrError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ill-conditioned design system (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("stale filterbank cache: {0}")]
    StaleCache(String),

    #[error("missing filterbank design for lambda1 = {0}")]
    MissingDesign(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SrrError>;
