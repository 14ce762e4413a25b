use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("timestamps must be strictly increasing ({0})")]
    Ordering(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("unsupported resize direction: {0}")]
    UnsupportedDirection(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty frequency band: {0}")]
    Band(String),

    #[error("signal too short for spectral estimate: {0}")]
    Duration(String),

    #[error("insufficient peaks: {0}")]
    InsufficientPeaks(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("container format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
