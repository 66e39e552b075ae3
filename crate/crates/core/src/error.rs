use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mollifier width {epsilon} does not fit at theta = {theta} (need epsilon < min(theta, 1 - theta))")]
    WidthExceedsBoundary { epsilon: f64, theta: f64 },

    #[error("grid step {step} too coarse for mollifier width {epsilon} (need step <= epsilon / 10)")]
    GridTooCoarse { step: f64, epsilon: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("local time curve is not monotone at node {index}")]
    NonMonotoneLocalTime { index: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("variance q_t({theta}) = {value} below floor; t too small for this truncation")]
    VarianceUnderflow { theta: f64, value: f64 },

    #[error("non-finite estimate in experiment `{0}`")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
