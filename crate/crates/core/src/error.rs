use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QssError {
    #[error("qubit count {n} is outside the supported range [2, {max}]")]
    QubitCount { n: usize, max: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("<Z> = {z} is infeasible: x^2 + z^2 = {magnitude:.6} exceeds 1")]
    InfeasibleBloch { z: f64, magnitude: f64 },

    #[error("transverse field g must be nonzero to solve the zero-energy constraint")]
    ZeroTransverseField,

    #[error("blur h*B = {widening} must be smaller than the window width {width}")]
    BlurTooWide { widening: f64, width: f64 },

    #[error("window has zero weight p_A = {p_a:.3e} for the given state")]
    EmptyWindow { p_a: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region must be a nonempty strict subset of 0..{n}: {reason}")]
    InvalidRegion { n: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, QssError>;
