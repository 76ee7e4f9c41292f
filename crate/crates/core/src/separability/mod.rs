//! Real/fake separability: stratified shuffled splits, a shrinkage LDA
//! classifier, accuracy evaluation and 1-D discriminant projections.

mod evaluate;
mod lda;
mod linalg;
mod split;

pub use evaluate::{evaluate, evaluate_seeds, AccuracyTable, PerClassAccuracy, Projection, SeedSweep, SeparabilityReport};
pub use lda::{lda_fit, LdaModel, DEFAULT_SHRINKAGE};
pub use split::{split_dataset, SplitSpec};

use thiserror::Error;

use crate::embeddings::{ClassLabel, EmbeddingError};

#[derive(Debug, Error)]
pub enum SeparabilityError {
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("dataset too small to split: {rows} rows (need at least 5, with 2 per class)")]
    TooSmall { rows: usize },
    #[error("class {class} has {rows} training rows; LDA needs at least 2")]
    ClassTooSmall { class: ClassLabel, rows: usize },
    #[error("within-class covariance is not positive definite; increase shrinkage")]
    DegenerateCovariance,
    #[error("dimension mismatch: model has {expected} features, input has {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("shrinkage must be finite and non-negative, got {0}")]
    InvalidShrinkage(f64),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub type Result<T> = std::result::Result<T, SeparabilityError>;
