//! Six classifier families behind one train / predict / serialize contract.
//!
//! | family | model |
//! |--------|-------|
//! | `DT`  | CART tree, Gini impurity |
//! | `RF`  | bagged CART trees with per-split feature sampling |
//! | `LR`  | multinomial logistic regression, L2, full-batch gradient descent |
//! | `SVM` | one-vs-rest linear SVM, hinge + L2, full-batch subgradient descent |
//! | `NB`  | Gaussian naive Bayes |
//! | `MP`  | one-hidden-layer tanh perceptron, softmax output |
//!
//! LR, SVM and MP standardize their inputs and keep the statistics inside the
//! artifact, so every family predicts from raw feature vectors. Argmax ties
//! always resolve to the lowest class index.

pub mod bayes;
pub mod forest;
pub mod logistic;
pub mod mlp;
pub mod standardize;
pub mod svm;
pub mod tree;

mod dataset;

pub use dataset::{Dataset, FeatureInfo};
pub use tree::gini;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub const MODEL_FORMAT: &str = "session-miner-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("EmptyTrainingSet: no training instances")]
    EmptyTrainingSet,
    #[error("NonFiniteLoss: {family} training diverged at iteration {iteration} (learning rate too high?)")]
    NonFiniteLoss { family: Family, iteration: usize },
    #[error("CatalogMismatch: model expects {expected}, got {found}")]
    CatalogMismatch { expected: String, found: String },
    #[error("AllZero: class counts are all zero")]
    AllZero,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    DT,
    RF,
    LR,
    SVM,
    NB,
    MP,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::DT, Family::RF, Family::LR, Family::SVM, Family::NB, Family::MP];

    pub fn name(self) -> &'static str {
        match self {
            Family::DT => "DT",
            Family::RF => "RF",
            Family::LR => "LR",
            Family::SVM => "SVM",
            Family::NB => "NB",
            Family::MP => "MP",
        }
    }

    pub fn default_hyperparams(self) -> Hyperparams {
        match self {
            Family::DT => Hyperparams::DT(tree::TreeParams::default()),
            Family::RF => Hyperparams::RF(forest::ForestParams::default()),
            Family::LR => Hyperparams::LR(logistic::LogisticParams::default()),
            Family::SVM => Hyperparams::SVM(svm::SvmParams::default()),
            Family::NB => Hyperparams::NB,
            Family::MP => Hyperparams::MP(mlp::MlpParams::default()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown model family {s:?} (expected one of DT, RF, LR, SVM, NB, MP)"))
    }
}

/// One grid cell: a family and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Hyperparams {
    DT(tree::TreeParams),
    RF(forest::ForestParams),
    LR(logistic::LogisticParams),
    SVM(svm::SvmParams),
    NB,
    MP(mlp::MlpParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::DT(_) => Family::DT,
            Hyperparams::RF(_) => Family::RF,
            Hyperparams::LR(_) => Family::LR,
            Hyperparams::SVM(_) => Family::SVM,
            Hyperparams::NB => Family::NB,
            Hyperparams::MP(_) => Family::MP,
        }
    }

    pub fn train(&self, data: &Dataset, seed: u64) -> Result<ModelArtifact, ClassifierError> {
        if data.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        let model = match self {
            Hyperparams::DT(hp) => Model::DT(tree::train_decision_tree(data, hp)?),
            Hyperparams::RF(hp) => Model::RF(forest::train_random_forest(data, hp, seed)?),
            Hyperparams::LR(hp) => Model::LR(logistic::train_logistic_regression(data, hp)?),
            Hyperparams::SVM(hp) => Model::SVM(svm::train_linear_svm(data, hp, seed)?),
            Hyperparams::NB => Model::NB(bayes::train_naive_bayes(data)?),
            Hyperparams::MP(hp) => Model::MP(mlp::train_mlp(data, hp, seed)?),
        };
        Ok(ModelArtifact {
            catalog: data.catalog.clone(),
            feature_names: data.features.iter().map(|f| f.name.clone()).collect(),
            n_classes: data.n_classes,
            class_names: Vec::new(),
            seed,
            model,
        })
    }

    /// Compact `key=value` rendering for reports.
    pub fn describe(&self) -> String {
        let v = serde_json::to_value(self).expect("hyperparameters serialize");
        let mut parts = Vec::new();
        if let serde_json::Value::Object(map) = v {
            for (k, v) in map {
                if k != "family" {
                    parts.push(format!("{k}={v}"));
                }
            }
        }
        format!("{}({})", self.family(), parts.join(","))
    }
}

/// Learned parameters, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum Model {
    DT(tree::TreeModel),
    RF(forest::ForestModel),
    LR(logistic::LogisticModel),
    SVM(svm::SvmModel),
    NB(bayes::BayesModel),
    MP(mlp::MlpModel),
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::DT(_) => Family::DT,
            Model::RF(_) => Family::RF,
            Model::LR(_) => Family::LR,
            Model::SVM(_) => Family::SVM,
            Model::NB(_) => Family::NB,
            Model::MP(_) => Family::MP,
        }
    }

    /// Raw per-class scores for one row in training-feature order.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Model::DT(m) => m.scores(x),
            Model::RF(m) => m.scores(x),
            Model::LR(m) => m.scores(x),
            Model::SVM(m) => m.scores(x),
            Model::NB(m) => m.scores(x),
            Model::MP(m) => m.scores(x),
        }
    }
}

/// A trained model plus everything needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub catalog: String,
    pub feature_names: Vec<String>,
    pub n_classes: usize,
    /// Display names of the classes, when the trainer knows them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_names: Vec<String>,
    pub seed: u64,
    #[serde(flatten)]
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    fmt: String,
    v: u32,
    #[serde(flatten)]
    artifact: T,
}

impl ModelArtifact {
    pub fn family(&self) -> Family {
        self.model.family()
    }

    /// Single-line JSON document starting with the format header.
    pub fn to_json(&self) -> String {
        let file = ModelFile { fmt: MODEL_FORMAT.to_string(), v: MODEL_VERSION, artifact: self };
        serde_json::to_string(&file).expect("model artifacts serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifierError> {
        let file: ModelFile<ModelArtifact> =
            serde_json::from_str(s).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if file.fmt != MODEL_FORMAT || file.v != MODEL_VERSION {
            return Err(ClassifierError::Format(format!(
                "unsupported model format {:?} v{} (expected {MODEL_FORMAT:?} v{MODEL_VERSION})",
                file.fmt, file.v
            )));
        }
        Ok(file.artifact)
    }

    pub fn predict_row(&self, x: &[f64]) -> ClassScores {
        ClassScores::from_scores(self.model.scores(x))
    }
}

/// Per-class scores and their argmax (lowest index on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub scores: Vec<f64>,
    pub class: usize,
}

impl ClassScores {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let class = argmax(&scores);
        Self { scores, class }
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn predict(model: &ModelArtifact, v: &FeatureVector) -> Result<ClassScores, ClassifierError> {
    if v.catalog != model.catalog || v.values.len() != model.feature_names.len() {
        return Err(ClassifierError::CatalogMismatch {
            expected: format!("{} ({} features)", model.catalog, model.feature_names.len()),
            found: format!("{} ({} features)", v.catalog, v.values.len()),
        });
    }
    Ok(model.predict_row(&v.values))
}

/// Numerically stable softmax, in place.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}
