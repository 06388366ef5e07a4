use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("configurations live on different windows")]
    WindowMismatch,
    #[error("site {0:?} is outside the window")]
    SiteOutsideWindow(Vec<i32>),
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("invalid time range [{0}, {1}]: {2}")]
    InvalidTimeRange(f64, f64, String),
    #[error("invalid mark: {0}")]
    InvalidMark(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
