//! Low-rank determinantal point process models for shopping baskets.
//!
//! A basket is a set of catalog items; the model assigns it the probability
//! P(Y) = det(L_Y) / det(L + I) with L = V V^T for a learned M x K trait
//! matrix V. Because L has rank at most K, diverse sets are favored and sets
//! larger than K are impossible, while every operation (likelihood,
//! gradients, conditioning on a partial basket, next-item scoring) runs in
//! time polynomial in K rather than the catalog size M.
//!
//! The crate covers the full loop:
//!
//! - [`data`]: basket file parsing, train/test splits, model serialization
//! - [`kernel`]: subset log-probabilities under a trait matrix
//! - [`likelihood`]: the regularized objective and its gradient
//! - [`optimizer`]: stochastic ascent with Nesterov momentum
//! - [`conditioning`]: fast next-item distributions given a partial basket
//! - [`evaluation`]: held-one-out ranking metrics
//! - [`oracle`]: brute-force references and randomized agreement checks
//!
//! Randomness is always drawn from a caller-supplied seed, and the
//! sequential code paths are bit-reproducible for a fixed seed.

pub mod conditioning;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod likelihood;
mod linalg;
pub mod optimizer;
pub mod oracle;

pub use conditioning::{complete_basket, condition, ConditionedModel};
pub use data::{load_model, parse_baskets, save_model, Basket, BasketDataset, ItemCatalog};
pub use error::{Error, Result};
pub use evaluation::{evaluate, make_instances, EvalInstance, EvalReport};
pub use kernel::TraitMatrix;
pub use likelihood::RegularizationWeights;
pub use optimizer::{train, train_with_monitor, TrainConfig, TrainTrace};
