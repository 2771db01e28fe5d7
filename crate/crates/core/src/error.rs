use thiserror::Error;

use crate::tree::VertexId;

/// Errors raised by tree construction, the testing procedures and the
/// applications built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("branching factor at layer {layer} must be at least 1")]
    ZeroBranching { layer: usize },

    #[error("branching list has {got} entries but depth is {depth}")]
    BranchingDepthMismatch { got: usize, depth: usize },

    #[error("tree would have {count} vertices, above the cap of {cap}")]
    TooManyVertices { count: u128, cap: usize },

    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("level {0} is outside (0, 1]")]
    InvalidLevel(f64),

    #[error("weight for vertex {vertex} must be positive and finite, got {weight}")]
    InvalidWeight { vertex: VertexId, weight: f64 },

    #[error("missing weight for vertex {0}")]
    MissingWeight(VertexId),

    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("missing allocation entry for vertex {0}")]
    MissingAlpha(VertexId),

    #[error("missing truth value for vertex {0}")]
    MissingTruth(VertexId),

    #[error("missing p-value for vertex {0}")]
    MissingPValue(VertexId),

    #[error("p-value {0} is outside [0, 1]")]
    InvalidPValue(f64),

    #[error("empty list of p-values")]
    EmptyPValues,

    #[error("local bonferroni condition violated at vertices {0:?}")]
    LbViolation(Vec<VertexId>),

    #[error("vertex {vertex} has {expected} children but {got} local p-values")]
    ArityMismatch {
        vertex: VertexId,
        expected: usize,
        got: usize,
    },

    #[error("root levels sum to {sum}, above the global level {alpha}")]
    ForestBudget { sum: f64, alpha: f64 },

    #[error("non-finite input {0}")]
    NonFinite(f64),

    #[error("probability {0} is outside (0, 1)")]
    InvalidProbability(f64),

    #[error("invalid gaussian test: {0}")]
    InvalidGaussianSpec(String),

    #[error("signal length {0} is not a power of two >= 4")]
    BadSignalLength(usize),

    #[error("malformed wavelet tree: {0}")]
    MalformedWaveletTree(String),

    #[error("noise scale must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("finest level has {got} coefficients, need at least {need}")]
    TooFewCoefficients { got: usize, need: usize },

    #[error("{arity}^{depth} leaf intervals do not fit into {len} time points")]
    IntervalTreeTooDeep {
        len: usize,
        arity: usize,
        depth: usize,
    },

    #[error("interval [{start}, {end}) is empty or outside [0, {len})")]
    BadInterval {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("invalid trial matrix: {0}")]
    InvalidTrials(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
