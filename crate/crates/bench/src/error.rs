use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration, detected before any clip is processed.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("report inconsistent: {0}")]
    Consistency(String),

    #[error(transparent)]
    Core(#[from] pulsebench_core::Error),

    #[error(transparent)]
    Neural(#[from] pulsebench_neural::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
