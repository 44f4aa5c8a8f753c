use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid log: {0}")]
    InvalidLog(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(format!($($arg)*)))
    };
}
pub(crate) use bail;
