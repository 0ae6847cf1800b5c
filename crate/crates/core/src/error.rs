//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by graph construction, model evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("edge probabilities out of range (need 0 <= q <= p <= 1): p={p}, q={q}")]
    ProbabilityOutOfRange { p: f64, q: f64 },

    #[error("degenerate features: all pairwise distances are zero")]
    DegenerateFeatures,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetric(f64),

    #[error("eigendecomposition failed to converge")]
    ConvergenceFailure,

    #[error("k must be smaller than n (got k={k}, n={n})")]
    KEqualsN { k: usize, n: usize },

    #[error("k-means needs at least k={k} points, got {m}")]
    TooFewPoints { m: usize, k: usize },

    #[error("label {label} out of range for k={k} clusters")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("partition enumeration is capped at n=12, got n={0}")]
    TooLarge(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
