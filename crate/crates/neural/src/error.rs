use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("input too short: {0}")]
    TooShort(String),

    /// Backward called without a cached forward pass.
    #[error("state error: {0}")]
    State(String),

    #[error("weight file format error: {0}")]
    Format(String),

    #[error("weight load error for tensor `{name}`: {reason}")]
    Load { name: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Core(#[from] pulsebench_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
