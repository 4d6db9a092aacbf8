use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis dimension: L = {dim} is smaller than order {order} (order must be >= 2)")]
    InvalidDimension { dim: usize, order: usize },

    #[error("degenerate basis: Gram-Schmidt found fewer than {needed} independent elements")]
    DegenerateBasis { needed: usize },

    #[error("point {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("subject {subject}, covariate {covariate}: value {value} lies outside [0, 1]")]
    CovariateDomain {
        subject: usize,
        covariate: usize,
        value: f64,
    },

    #[error("{0}")]
    Parse(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("partial likelihood undefined: no events")]
    NoEvents,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dense Hessian refused: dimension {dim} exceeds guard {guard}")]
    DimensionGuard { dim: usize, guard: usize },

    #[error("unsupported penalty exponent q = {0}; only q = 2 has a closed-form nested prox")]
    UnsupportedExponent(f64),

    #[error("invalid penalty: {0}")]
    Penalty(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
