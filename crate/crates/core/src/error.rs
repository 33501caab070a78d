use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix must have positive dimensions, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    LengthMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { op: &'static str, asymmetry: f64 },
    #[error("{op}: no convergence after {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },
    #[error("kronecker product {rows}x{cols} exceeds cap {cap}x{cap}")]
    KroneckerCap {
        rows: usize,
        cols: usize,
        cap: usize,
    },
    #[error(
        "{op}: matrix is not positive definite (lambda_min {lambda_min:e} below floor {floor:e})"
    )]
    NotPositiveDefinite {
        op: &'static str,
        lambda_min: f64,
        floor: f64,
    },
    #[error("{op}: zero matrix")]
    ZeroMatrix { op: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("duplicate parameter label `{0}`")]
    DuplicateLabel(alloc::string::String),
    #[error("non-finite forward value at layer {layer}")]
    NonFiniteForward { layer: usize },
}
