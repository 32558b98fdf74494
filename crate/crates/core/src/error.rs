//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input series is shorter than the operation can work with.
    #[error("input too short: need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },

    /// Input carries no usable information (constant series, empty set, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Linear system too ill-conditioned to solve reliably.
    #[error("singular system: condition number {cond:.3e} exceeds {limit:.1e}")]
    Singular { cond: f64, limit: f64 },

    /// Paired slices disagree in length.
    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    /// A residual scale of zero or below makes standardization impossible.
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    /// Calibration produced a non-positive reference threshold.
    #[error("degenerate threshold: {0}")]
    DegenerateThreshold(String),

    /// Gaussian sampling failed in both the spectral and the dense path.
    #[error("simulation failure: {0}")]
    Simulation(String),

    /// A requested interval does not fit inside the series time span.
    #[error("interval out of span: {0}")]
    OutOfSpan(String),

    /// Malformed input file (CSV, manifest, model). Row numbers are 1-based
    /// and include the header.
    #[error("{file}:{row}: {msg}")]
    Malformed {
        file: String,
        row: usize,
        msg: String,
    },

    /// Training diverged or produced a non-finite loss.
    #[error("training failure: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
