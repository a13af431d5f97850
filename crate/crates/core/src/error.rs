use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("timestamp regression at record {record}: {t_us} us follows {prev_us} us")]
    Ordering { record: usize, t_us: u64, prev_us: u64 },

    #[error("event ({x}, {y}) outside {width}x{height} sensor")]
    OutOfBounds { x: u16, y: u16, width: u16, height: u16 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
