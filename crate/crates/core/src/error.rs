use thiserror::Error;

/// Errors surfaced by the library.
///
/// Solver outcomes such as infeasibility are *not* errors; they are reported
/// through [`crate::sdp::SdpStatus`]. This enum covers malformed input,
/// violated preconditions and rejected certificates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree {degree} exceeds the available bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is indefinite (min eigenvalue {0:e})")]
    Indefinite(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("certificate rejected: residual {residual:e} exceeds {bound:e}")]
    CertificateRejected { residual: f64, bound: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
