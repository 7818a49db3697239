use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any computation took place.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A moment required by the requested quantity does not exist for the process.
    #[error("{quantity} unavailable: {reason}")]
    MomentUnavailable { quantity: String, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration of {states} paths exceeds the cap of {cap}")]
    EnumerationTooLarge { states: String, cap: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn unavailable(quantity: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MomentUnavailable {
            quantity: quantity.into(),
            reason: reason.into(),
        }
    }
}
