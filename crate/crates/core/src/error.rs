use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are shared across modules so that pipelines (graph
/// generation -> simulation -> accounting -> optimization) can surface a
/// single error type to callers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph disconnected after {attempts} sampling attempts (edge density too low?)")]
    DisconnectedAfterRetries { attempts: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("multiple eigenvalues within {tol:e} of 1 (second largest {second}); matrix support is likely disconnected")]
    MultiplePerronEigenvalues { second: f64, tol: f64 },

    #[error("edge activation probabilities sum to {sum}, not 1; renormalize explicitly if intended")]
    NormalizationFailure { sum: f64 },

    #[error("noise variance {sigma2} below the weak-convexity threshold {threshold} = delta^2*alpha*(alpha-1)/2")]
    SigmaTooSmall { sigma2: f64, threshold: f64 },

    #[error("optimization diverged at step {step}: train loss {loss} exceeds 10x initial {initial}")]
    Divergence { step: usize, loss: f64, initial: f64 },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("non-numeric cell at line {line}, column {column:?}")]
    NonNumericCell { line: usize, column: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
