//! Stratified k-fold cross-validation. Fold `f` trains with seed `seed + f`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate, EvalError};
use crate::classifiers::{argmax, ClassifierError, Dataset, Hyperparams};
use crate::par;

pub const DEFAULT_K_FOLDS: usize = 5;

/// Fold index per instance. Classes are visited in ascending label order;
/// each class's members are shuffled and dealt round-robin, continuing from
/// the fold where the previous class stopped, so every fold holds ⌊n_c/k⌋ or
/// ⌈n_c/k⌉ members of class c and fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[usize], k_folds: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k_folds < 2 {
        return Err(EvalError::InvalidFolds(k_folds));
    }
    if labels.len() < k_folds {
        return Err(EvalError::TooFewInstances { n: labels.len(), k_folds });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            folds[i] = (offset + j) % k_folds;
        }
        offset = (offset + members.len()) % k_folds;
    }
    Ok(folds)
}

/// Out-of-fold predictions plus per-fold scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub folds: Vec<usize>,
    pub predictions: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    pub fold_weighted_f1: Vec<f64>,
}

impl CvOutcome {
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.fold_accuracy)
    }

    pub fn mean_weighted_f1(&self) -> f64 {
        mean(&self.fold_weighted_f1)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub(crate) struct FoldResult {
    pub test: Vec<usize>,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
    pub weighted_f1: f64,
}

/// Trains on every fold but `fold` and scores the held-out rows.
pub(crate) fn run_fold(
    hp: &Hyperparams,
    data: &Dataset,
    folds: &[usize],
    fold: usize,
    seed: u64,
) -> Result<FoldResult, ClassifierError> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == fold);
    let model = hp.train(&data.subset(&train), seed.wrapping_add(fold as u64))?;
    let predictions: Vec<usize> = test.iter().map(|&i| argmax(&model.model.scores(&data.x[i]))).collect();
    let gold: Vec<usize> = test.iter().map(|&i| data.y[i]).collect();
    let report = evaluate(&gold, &predictions, data.n_classes).expect("fold has test rows");
    Ok(FoldResult { test, predictions, accuracy: report.accuracy, weighted_f1: report.weighted.f1 })
}

pub fn cross_validate(hp: &Hyperparams, data: &Dataset, k_folds: usize, seed: u64) -> Result<CvOutcome, EvalError> {
    let folds = stratified_kfold(&data.y, k_folds, seed)?;
    let results = par::map_range(k_folds, |f| run_fold(hp, data, &folds, f, seed));
    let mut predictions = vec![0; data.len()];
    let mut fold_accuracy = Vec::with_capacity(k_folds);
    let mut fold_weighted_f1 = Vec::with_capacity(k_folds);
    for r in results {
        let r = r?;
        for (&i, &p) in r.test.iter().zip(&r.predictions) {
            predictions[i] = p;
        }
        fold_accuracy.push(r.accuracy);
        fold_weighted_f1.push(r.weighted_f1);
    }
    Ok(CvOutcome { folds, predictions, fold_accuracy, fold_weighted_f1 })
}

/// Out-of-fold prediction for every instance.
pub fn cross_val_predict(hp: &Hyperparams, data: &Dataset, k_folds: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    Ok(cross_validate(hp, data, k_folds, seed)?.predictions)
}
