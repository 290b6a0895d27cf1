use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: expected {expected} channels, found {found}")]
    GeometryMismatch { expected: usize, found: usize },

    #[error("geometry mismatch: event channel {channel} is not below M = {channels}")]
    ChannelOutOfRange { channel: u32, channels: usize },

    #[error("schedule out of order at index {index}: {detail}")]
    ScheduleOutOfOrder { index: usize, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
