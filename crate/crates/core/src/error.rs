use thiserror::Error;

/// Errors raised by the waveform, mask, engine, metrics and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("transform length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("probability {p} is outside the observed CCDF range [{min}, {max}]")]
    Extrapolation { p: f64, min: f64, max: f64 },

    #[error("plan error at `{path}`: {message}")]
    Plan { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
