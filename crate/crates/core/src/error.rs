//! Shared error type for the library.
//!
//! Numeric payloads are carried as `f64` regardless of the scalar type the
//! caller instantiated, so the error enum stays object-safe and non-generic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the zero vector has no shell index")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shell {0} carries no mass; nothing to sample")]
    EmptyShell(u32),

    #[error("shell {requested} outside the sampled range (cutoff {cutoff})")]
    ShellOutOfRange { requested: u32, cutoff: u32 },

    #[error("the residual shell (index 0) has no compensator; only shells inside the disk are compensated")]
    ResidualShellCompensator,

    #[error("total mass is not finite; a Poisson exponential needs a finite measure")]
    InfiniteTotalMass,

    #[error("series cutoff {cutoff} leaves Poisson tail {tail:.3e} above tolerance {tolerance:.3e}")]
    CutoffTooSmall { cutoff: u32, tail: f64, tolerance: f64 },

    #[error("quadrature tail bound {bound:.3e} exceeds tolerance {tolerance:.3e} at shell cap {cap}")]
    QuadratureTolerance { bound: f64, tolerance: f64, cap: u32 },

    #[error("time {t} outside the valid range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("negative duration {0} not allowed")]
    NegativeTime(f64),

    #[error("left limits are undefined at t = 0")]
    LeftLimitAtZero,

    #[error("need at least {need} samples, got {got}")]
    NotEnoughSamples { need: usize, got: usize },

    #[error("degenerate variance: the functional is (numerically) deterministic")]
    DegenerateVariance,

    #[error("search budget exhausted: {0}")]
    BudgetExceeded(String),

    #[error("matrix is not symmetric within tolerance {tolerance:.3e} (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e} below floor {floor:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
