use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pole on the imaginary axis at {frequency_hz} Hz")]
    PoleOnAxis { frequency_hz: f64 },

    #[error("fit did not converge (best residual {residual:.3e}): {reason}")]
    FitFailure { residual: f64, reason: String },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: f64, actual: f64 },

    #[error("output diverged at sample {index}")]
    Divergence { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid trial {index}: {reason}")]
    InvalidTrial { index: usize, reason: String },

    #[error("invalid plant configuration: {0}")]
    Config(String),

    #[error("actuation error: {0}")]
    Actuation(String),

    #[error("degenerate closed loop: {0}")]
    Degeneracy(String),

    #[error("singular controller design: {0}")]
    SingularDesign(String),

    #[error("controller design rejected: {0}")]
    DesignRejected(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid texture spec: {0}")]
    Spec(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
