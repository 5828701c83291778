use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coefficient matrix is singular at x = {point:?}, t = {t} (smallest singular value {sigma_min:.3e})")]
    NonDegeneracy { point: Vec<f64>, t: f64, sigma_min: f64 },

    #[error("coefficient argument left the admissible ball: max |z| = {max_z:.6} exceeds r0 = {r0}")]
    Range { max_z: f64, r0: f64 },

    #[error("symbol evaluation failed at x = {x:?}, xi = {xi:?}: {reason}")]
    SymbolEvaluation { x: Vec<f64>, xi: Vec<f64>, reason: String },

    #[error("symbol cache entry {key} is missing; build it first with `uhs cache build`")]
    MissingCache { key: String },

    #[error("corrupt cache file {path}: {reason}")]
    CorruptCache { path: String, reason: String },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
