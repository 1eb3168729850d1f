//! Statistical kernels shared by every metric.
//!
//! All functions are pure; stochastic ones take an explicit seed.

mod auc;
mod logistic;
mod pca;
mod ridge;
mod split;
mod stats;

pub use auc::auc_roc;
pub use logistic::{logistic_fit, logistic_objective, LogisticModel, LogisticOptions};
pub use pca::{components_for_variance, pca, PcaResult};
pub use ridge::{r2, ridge_fit, RidgeModel, DEFAULT_RIDGE_LAMBDA};
pub use split::{kfold_indices, stratified_split, SplitPlan};
pub use stats::{cosine_similarity, mean, pearson, population_std, population_variance};

use thiserror::Error;

/// Variance or norm below this is treated as exactly zero.
pub const DEGENERACY_EPS: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("input has zero norm")]
    ZeroNorm,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("only one class present")]
    SingleClass,
    #[error("logistic solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("non-finite value in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, NumericsError>;
