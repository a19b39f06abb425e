use alloc::string::String;

/// Errors raised by the segmentation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid merge table: {0}")]
    MergeTable(String),

    #[error("malformed segmented text at byte {offset}: {reason}")]
    Parse { offset: usize, reason: &'static str },

    #[error("target ratio {target} outside achievable range [{min}, {max}]")]
    Range { target: f64, min: f64, max: f64 },

    #[error("calibration did not reach tolerance; closest p={best_p} gave ratio {best_ratio}")]
    NotConverged { best_p: f64, best_ratio: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
