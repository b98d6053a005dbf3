//! Crate-wide error type.

use thiserror::Error;

use crate::optimizer::TrainTrace;

/// Errors produced by parsing, training, conditioning, and the oracle suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no baskets")]
    NoBaskets,

    #[error("malformed basket on line {line}: empty item token")]
    MalformedLine { line: usize },

    #[error("unknown item id {id:?} on line {line}")]
    UnknownItem { id: String, line: usize },

    #[error("train fraction must lie in (0,1), got {0}")]
    InvalidFraction(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("matrix entries must be finite ({context})")]
    NonFinite { context: String },

    #[error("item index {item} out of range for catalog of size {m}")]
    ItemOutOfRange { item: usize, m: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("singular basket Gram matrix for basket {items:?} (batch position {position})")]
    SingularBasketGram { items: Vec<usize>, position: usize },

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error(
        "{} training basket(s) exceed K={k} items and have probability zero under a rank-{k} \
         kernel: {baskets:?} (basket index, size)",
        baskets.len()
    )]
    BasketTooLarge { k: usize, baskets: Vec<(usize, usize)> },

    #[error(
        "{} training basket(s) hold fewer than two items: {baskets:?} (basket index, size)",
        baskets.len()
    )]
    BasketTooSmall { baskets: Vec<(usize, usize)> },

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("training aborted after {} iterations: {reason}", trace.iterations_run)]
    TrainingAborted { reason: String, trace: Box<TrainTrace> },

    #[error("conditioning on zero-probability basket")]
    ZeroProbabilityBasket,

    #[error("no probability mass remains")]
    NoProbabilityMass,

    #[error("no candidates: basket already covers the whole catalog")]
    NoCandidates,

    #[error("enumeration guard: M={m} exceeds the limit of {limit}")]
    EnumerationGuard { m: usize, limit: usize },

    #[error("kernel matrix is not symmetric (max asymmetry {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("kernel matrix is not positive semi-definite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("singular principal minor for conditioned items {items:?}")]
    SingularMinor { items: Vec<usize> },

    #[error("non-finite objective at finite-difference probe ({i},{k})")]
    NonFiniteProbe { i: usize, k: usize },

    #[error("empty instance list")]
    EmptyInstances,
}

pub type Result<T> = std::result::Result<T, Error>;
