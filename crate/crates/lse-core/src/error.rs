use thiserror::Error;

/// Errors produced by the solver, condition-number routines, and estimators.
#[derive(Debug, Error)]
pub enum LseError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "rank assumptions violated: rank(B) = {rank_b} (want {s}), \
         rank([A; B]) = {rank_stacked} (want {n})"
    )]
    RankDeficient {
        rank_b: usize,
        rank_stacked: usize,
        s: usize,
        n: usize,
    },

    #[error("matrix is not full column rank (rank {rank} < {cols})")]
    NotFullColumnRank { rank: usize, cols: usize },

    #[error("matrix does not belong to the requested structure (residual {residual:.3e})")]
    StructureViolation { residual: f64 },

    #[error("explicit derivative matrix too large: {elements} elements exceeds cap {cap}")]
    OracleTooLarge { elements: usize, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iteration failed to converge: {0}")]
    NonConverged(String),

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("numerical factorization failed: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, LseError>;
