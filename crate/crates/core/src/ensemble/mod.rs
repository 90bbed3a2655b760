//! Linear base learners, multi-label transformations, stacking, voting and
//! the TF-IDF text baseline.

mod grid;
mod linear;
mod meta;
mod tfidf;
mod vote;

use std::path::PathBuf;

use thiserror::Error;

pub use grid::{grid_select, GridCell, GridReport};
pub use linear::{train_linear, train_linear_sparse, LinearHyperparams, LinearModel, LossKind, SparseMatrix};
pub use meta::{
    cross_val_predict, predict_meta, train_meta, MetaModel, Transformation, TransformationKind, MODEL_FORMAT_VERSION,
};
pub use tfidf::{tfidf_cross_val_predict, tfidf_fit_transform, tfidf_transform, tokenize, TfidfVectorizer};
pub use vote::hard_vote;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no training rows")]
    Empty,
    #[error("feature rows ({x}) and label rows ({y}) differ")]
    RowMismatch { x: usize, y: usize },
    #[error("expected {expected} labels per row, got {got}")]
    LabelWidth { expected: usize, got: usize },
    #[error("model expects {expected} feature columns, got {got}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("chain order {0:?} is not a permutation of the labels")]
    InvalidOrder(Vec<usize>),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("channels cover different document sets")]
    IdMismatch,
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("unsupported model format version {0}")]
    Version(u32),
}
