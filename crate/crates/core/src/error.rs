use thiserror::Error;

use crate::exponent::Exponent;

#[derive(Debug, Error)]
pub enum AseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix for exponent {exponent} is not exactly symmetric at ({row}, {col})")]
    NotSymmetric { exponent: Exponent, row: usize, col: usize },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("term exponent {exponent} is not below trunc_order {trunc}")]
    BeyondTruncation { exponent: Exponent, trunc: Exponent },

    #[error("leading term singular (condition ratio {ratio:e}); rotate or split first")]
    LeadingTermSingular { ratio: f64 },

    #[error("invalid scaling: {0}")]
    InvalidScaling(String),

    #[error("structurally zero row {0}: every entry has infinite valuation")]
    StructurallyZeroRow(usize),

    #[error("entry ({0}, {1}) has negative valuation; only analytic perturbations are supported")]
    NegativeValuation(usize, usize),

    #[error("truncation horizon exhausted: {0}")]
    HorizonExhausted(String),

    #[error("block {block} adds no new rank (b_{block} = 0)")]
    ZeroRankBlock { block: usize },

    #[error("matrix has rank {rank} < {n}")]
    RankDeficient { rank: usize, n: usize },

    #[error("W is singular at tolerance (condition ratio {ratio:e})")]
    SingularW { ratio: f64 },

    #[error("simplified Schur complement needs square diagonal R blocks before block {block}; use the general chain")]
    SimplifiedSchurPrecondition { block: usize },

    #[error("kernel smoothness insufficient: {0}")]
    InsufficientSmoothness(String),

    #[error("smooth branch applies: rank of the degree-{degree} Vandermonde matrix is already {n}")]
    SmoothBranchApplies { degree: usize, n: usize },

    #[error("duplicate nodes {0} and {1}")]
    DuplicateNode(usize, usize),

    #[error("shifted matrix K + z I is singular")]
    SingularShift,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, AseError>;
