//! Model selection and evaluation: stratified k-fold cross-validation, grid
//! search, per-class P/R/F1 reports and information-gain feature ranking.

mod cv;
mod grid;
mod metrics;
mod ranking;

pub use cv::{cross_val_predict, cross_validate, stratified_kfold, CvOutcome, DEFAULT_K_FOLDS};
pub use grid::{default_grid, grid_search, CellResult, GridSearchResult, SelectionMetric};
pub use metrics::{evaluate, render_table, Averages, ClassMetrics, ConfusionMatrix, EvalReport};
pub use ranking::{entropy, information_gain_ranking, FeatureRanking, RankedFeature};

use thiserror::Error;

use crate::classifiers::{ClassifierError, Family};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("LengthMismatch: {gold} gold labels but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("EmptyInput: nothing to evaluate")]
    EmptyInput,
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("TooFewInstances: {n} instances cannot fill {k_folds} folds")]
    TooFewInstances { n: usize, k_folds: usize },
    #[error("k_folds must be at least 2, got {0}")]
    InvalidFolds(usize),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("grid cell {index} is {found}, expected family {expected}")]
    WrongFamily { index: usize, expected: Family, found: Family },
    #[error("grid cell {index} {hyperparams}: {source}")]
    Cell {
        index: usize,
        hyperparams: String,
        #[source]
        source: ClassifierError,
    },
    #[error("SingleClass: information gain needs at least two distinct labels")]
    SingleClass,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}
