//! Error types shared across the simulator.
//!
//! Every fallible operation returns [`Result`]. Refusals carry enough
//! context to fix the input (required sample counts, offending line numbers,
//! measured fractions), because the main failure mode of a wave-optics code
//! is silently aliased phases, not crashes.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;

/// All simulator failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// Grid construction rejected (sample count, spacing).
    #[error("grid: {0}")]
    Grid(String),

    /// A field was in the wrong domain for the requested transform.
    #[error("domain: {0}")]
    Domain(String),

    /// Two operands live on incompatible grids or have mismatched lengths.
    #[error("incompatible operands: {0}")]
    Incompatible(String),

    /// A quadratic phase would alias on this grid; message states the
    /// required spacing or sample count.
    #[error("sampling criterion violated: {0}")]
    Sampling(String),

    /// Invalid optical element or unsupported element in a chain.
    #[error("element: {0}")]
    Element(String),

    /// Inconsistent bench geometry (distances, lens solve preconditions).
    #[error("geometry: {0}")]
    Geometry(String),

    /// The entangled spectrum is not compactly supported enough for the
    /// index-sum evaluation.
    #[error("spectrum support: {0}")]
    Support(String),

    /// A scan-analysis estimator could not extract its observable.
    #[error("estimator: {0}")]
    Estimator(String),

    /// Invalid scan request (positions outside the guarded window, etc.).
    #[error("scan: {0}")]
    Scan(String),

    /// Config text rejected at a specific line.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    /// Config rejected for a reason not tied to one line.
    #[error("config: {0}")]
    ConfigGeneral(String),

    /// The built-in verification suite found failures (maps to exit code 2).
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit code for this error: 2 for verification failures,
    /// 1 for every other validation or runtime refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Verification(_) => 2,
            _ => 1,
        }
    }
}
