use thiserror::Error;

use crate::group::Backend;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a valid group element: {0}")]
    InvalidElement(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("backend mismatch: expected {expected:?}, found {found:?}")]
    BackendMismatch { expected: Backend, found: Backend },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature band limit {band} too small for coefficient cutoff {cutoff} (need ≥ {needed})")]
    Bandlimit { band: u32, cutoff: u32, needed: u32 },

    #[error("quadrature rule failed its exactness check (error {error:e} at moment {moment})")]
    QuadratureExactness { moment: u32, error: f64 },

    #[error(
        "operator entry ({row}, {col}) moved by {delta:e} when the quadrature was doubled (tolerance {tolerance:e})"
    )]
    QuadratureSelfCheck { row: usize, col: usize, delta: f64, tolerance: f64 },

    #[error("truncation leak {leak:e} exceeds the bound {bound:e}; raise the output cutoff")]
    TruncationLeak { leak: f64, bound: f64 },

    #[error("stationary solve did not converge: residual {residual:e} > tolerance {tolerance:e}")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("eigenvalue 1 is nearly degenerate: second singular value {second:e}")]
    NearDegenerate { second: f64 },

    #[error("too few nonempty blocks for a decay fit ({found} < {needed})")]
    TooFewBlocks { found: usize, needed: usize },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("basis order version mismatch: {0} vs {1}")]
    BasisOrder(u32, u32),

    #[error("malformed matrix file: {0}")]
    MatrixFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
