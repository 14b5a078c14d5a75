use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("eigendecomposition of a {dimension}x{dimension} matrix did not converge")]
    EigenNonConvergence { dimension: usize },

    #[error("constraint {index} is linearly dependent on earlier constraints (pivot {pivot:.3e})")]
    RankDeficient { index: usize, pivot: f64 },

    #[error("constraints are inconsistent (relative residual {residual:.3e})")]
    Inconsistent { residual: f64 },

    #[error("phase chain broken at block {block}: overlap vector is numerically zero")]
    ChainBreak { block: usize },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("incomplete grid, missing cells: {0}")]
    RaggedGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
