use alloc::string::String;

use crate::exactlin::BlockSet;

/// Every failure mode of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("subset {subset} refers to blocks beyond n = {n}")]
    MalformedSubset { subset: BlockSet, n: usize },

    #[error("column index {0} listed twice")]
    DuplicateIndex(usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("projection is not surjective: rank {rank} < k = {k}")]
    NotSurjective { rank: usize, k: usize },

    #[error("too many blocks: n = {n} exceeds the cap of {cap}")]
    TooManyBlocks { n: usize, cap: usize },

    #[error("enumeration budget of {budget} candidates exceeded")]
    BudgetExceeded { budget: usize },

    #[error("instance violates the subset condition for I = {subset}: {lhs} < {s}")]
    Infeasible { subset: BlockSet, lhs: String, s: String },

    #[error("internal consistency failure: {0}")]
    Inconsistent(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("degenerate pair: block {block} has zero separation")]
    DegeneratePair { block: usize },

    #[error("quadratic form is not positive at a quadrature node ({0:e})")]
    RankDeficient(f64),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;
