use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point lies behind the camera (z = {0})")]
    BehindCamera(f64),

    /// No pixel survived masking, so a mean over valid pixels is undefined.
    #[error("empty support: no valid pixels for {0}")]
    EmptySupport(&'static str),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("validation error at index {index}: {message}")]
    Validation { index: usize, message: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input files).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmptySupport(_)
                | Error::NonFinite { .. }
                | Error::InvalidPrior(_)
                | Error::BehindCamera(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
