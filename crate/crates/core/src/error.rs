//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by parsing, validation, and signal-processing stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A trace or ground-truth line could not be decoded.
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    /// A timestamp did not strictly increase.
    #[error("line {line}: timestamp {t} does not exceed previous timestamp {prev}")]
    Ordering { line: usize, prev: f64, t: f64 },

    /// A frame's tensor shape differs from the rest of the stream or is ragged.
    #[error("frame {index}: dimension error: {message}")]
    Dimension { index: usize, message: String },

    /// A frame violates its invariants (e.g. non-finite entries).
    #[error("frame {index}: invalid frame: {message}")]
    InvalidFrame { index: usize, message: String },

    /// A ground-truth record violates its invariants.
    #[error("line {line}: validation error: {message}")]
    Validation { line: usize, message: String },

    /// A value lies outside its permitted range.
    #[error("line {line}: range error: {message}")]
    Range { line: usize, message: String },

    /// A function argument or configuration knob is invalid.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Not enough samples to perform the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The trajectory has no analytic derivative.
    #[error("unsupported trajectory: {0}")]
    UnsupportedTrajectory(String),

    /// The ellipsoid could not be initialized.
    #[error("initialization error: {0}")]
    Initialization(String),

    /// An input vector contained NaN or infinity.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Configuration could not be loaded.
    #[error("config error: {0}")]
    Config(String),

    /// Wire protocol violation.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
