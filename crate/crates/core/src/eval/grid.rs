//! Exhaustive grid search over one family's hyperparameters.
//!
//! Every (cell, fold) pair is an independent job; results are reduced in grid
//! order so the outcome does not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::{mean, run_fold, stratified_kfold};
use super::EvalError;
use crate::classifiers::forest::ForestParams;
use crate::classifiers::logistic::LogisticParams;
use crate::classifiers::mlp::MlpParams;
use crate::classifiers::svm::SvmParams;
use crate::classifiers::tree::TreeParams;
use crate::classifiers::{Dataset, Family, Hyperparams};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    #[default]
    Accuracy,
    WeightedF1,
}

impl SelectionMetric {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMetric::Accuracy => "accuracy",
            SelectionMetric::WeightedF1 => "weighted-f1",
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(SelectionMetric::Accuracy),
            "weighted-f1" | "f1" => Ok(SelectionMetric::WeightedF1),
            _ => Err(format!("unknown selection metric {s:?} (expected accuracy or weighted-f1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub hyperparams: Hyperparams,
    pub mean_accuracy: f64,
    pub mean_weighted_f1: f64,
    pub fold_accuracy: Vec<f64>,
    pub fold_weighted_f1: Vec<f64>,
}

impl CellResult {
    pub fn score(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::Accuracy => self.mean_accuracy,
            SelectionMetric::WeightedF1 => self.mean_weighted_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub family: Family,
    pub metric: SelectionMetric,
    pub k_folds: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
    pub selected: usize,
}

impl GridSearchResult {
    pub fn best(&self) -> &CellResult {
        &self.cells[self.selected]
    }
}

/// Built-in grids. Values are engineering defaults sized for desk-scale runs.
pub fn default_grid(family: Family) -> Vec<Hyperparams> {
    match family {
        Family::DT => [Some(3), Some(5), Some(8), None]
            .into_iter()
            .flat_map(|max_depth| [1, 5].map(|min_leaf| Hyperparams::DT(TreeParams { max_depth, min_leaf })))
            .collect(),
        Family::RF => [50, 100]
            .into_iter()
            .flat_map(|n_trees| {
                [None, Some(8)]
                    .map(|max_depth| Hyperparams::RF(ForestParams { n_trees, max_depth, ..Default::default() }))
            })
            .collect(),
        Family::LR => {
            [1e-4, 1e-3, 1e-2, 1e-1].map(|l2| Hyperparams::LR(LogisticParams { l2, ..Default::default() })).to_vec()
        }
        Family::SVM => [0.1, 1.0, 10.0].map(|c| Hyperparams::SVM(SvmParams { c, ..Default::default() })).to_vec(),
        Family::NB => vec![Hyperparams::NB],
        Family::MP => [8, 16]
            .into_iter()
            .flat_map(|hidden| [1e-4, 1e-2].map(|l2| Hyperparams::MP(MlpParams { hidden, l2, ..Default::default() })))
            .collect(),
    }
}

pub fn grid_search(
    family: Family,
    grid: &[Hyperparams],
    data: &Dataset,
    k_folds: usize,
    seed: u64,
    metric: SelectionMetric,
) -> Result<GridSearchResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if let Some((index, hp)) = grid.iter().enumerate().find(|(_, hp)| hp.family() != family) {
        return Err(EvalError::WrongFamily { index, expected: family, found: hp.family() });
    }
    let folds = stratified_kfold(&data.y, k_folds, seed)?;
    let jobs = par::map_range(grid.len() * k_folds, |j| {
        let (cell, fold) = (j / k_folds, j % k_folds);
        run_fold(&grid[cell], data, &folds, fold, seed).map(|r| (r.accuracy, r.weighted_f1))
    });
    let mut jobs = jobs.into_iter();
    let mut cells = Vec::with_capacity(grid.len());
    for (index, hp) in grid.iter().enumerate() {
        let mut fold_accuracy = Vec::with_capacity(k_folds);
        let mut fold_weighted_f1 = Vec::with_capacity(k_folds);
        for r in jobs.by_ref().take(k_folds) {
            let (acc, f1) = r.map_err(|source| EvalError::Cell { index, hyperparams: hp.describe(), source })?;
            fold_accuracy.push(acc);
            fold_weighted_f1.push(f1);
        }
        cells.push(CellResult {
            hyperparams: hp.clone(),
            mean_accuracy: mean(&fold_accuracy),
            mean_weighted_f1: mean(&fold_weighted_f1),
            fold_accuracy,
            fold_weighted_f1,
        });
    }
    let mut selected = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        if c.score(metric) > cells[selected].score(metric) {
            selected = i;
        }
    }
    Ok(GridSearchResult { family, metric, k_folds, seed, cells, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cross_validate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Jittered XOR: 4 clusters of 10 points.
    fn xor_cloud(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            for _ in 0..10 {
                x.push(vec![a + rng.random_range(-0.2..0.2), b + rng.random_range(-0.2..0.2)]);
                y.push(usize::from((a == 1.0) != (b == 1.0)));
            }
        }
        Dataset::from_rows(x, y, 2).unwrap()
    }

    fn best_stump_accuracy(d: &Dataset) -> f64 {
        let mut best = 0usize;
        for f in 0..d.n_features() {
            for t in d.column(f) {
                for flip in [false, true] {
                    let hits = d.x.iter().zip(&d.y).filter(|(x, &y)| usize::from((x[f] > t) != flip) == y).count();
                    best = best.max(hits);
                }
            }
        }
        best as f64 / d.len() as f64
    }

    #[test]
    fn singleton_grid_matches_plain_cv() {
        let d = xor_cloud(1);
        let hp = Hyperparams::DT(TreeParams::default());
        let g = grid_search(Family::DT, std::slice::from_ref(&hp), &d, 5, 3, SelectionMetric::Accuracy).unwrap();
        let cv = cross_validate(&hp, &d, 5, 3).unwrap();
        assert_eq!(g.selected, 0);
        assert_eq!(g.best().fold_accuracy, cv.fold_accuracy);
        assert_eq!(g.best().mean_accuracy, cv.mean_accuracy());
    }

    #[test]
    fn duplicate_cells_select_the_first() {
        let d = xor_cloud(2);
        let hp = Hyperparams::DT(TreeParams::default());
        let g = grid_search(Family::DT, &[hp.clone(), hp], &d, 4, 0, SelectionMetric::WeightedF1).unwrap();
        assert_eq!(g.cells[0].mean_weighted_f1, g.cells[1].mean_weighted_f1);
        assert_eq!(g.selected, 0);
    }

    #[test]
    fn xor_prefers_unlimited_depth() {
        let d = xor_cloud(3);
        assert!(best_stump_accuracy(&d) <= 0.75);
        let grid = [
            Hyperparams::DT(TreeParams { max_depth: Some(1), min_leaf: 1 }),
            Hyperparams::DT(TreeParams { max_depth: None, min_leaf: 1 }),
        ];
        let g = grid_search(Family::DT, &grid, &d, 5, 0, SelectionMetric::Accuracy).unwrap();
        assert_eq!(g.selected, 1);
        assert!(g.cells[0].mean_accuracy <= 0.75 + 1e-12);
    }

    #[test]
    fn selection_is_consistent_on_a_separable_task() {
        for seed in 1..=5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> =
                (0..60).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let y = x.iter().map(|r| usize::from(r[0] > 0.0)).collect();
            let d = Dataset::from_rows(x, y, 2).unwrap();
            let grid = default_grid(Family::DT);
            let g = grid_search(Family::DT, &grid, &d, 5, seed, SelectionMetric::Accuracy).unwrap();
            let top = g.cells.iter().map(|c| c.mean_accuracy).fold(0.0, f64::max);
            assert!(top - g.best().mean_accuracy <= 0.02);
        }
    }

    #[test]
    fn rejections() {
        let d = xor_cloud(0);
        assert!(matches!(grid_search(Family::DT, &[], &d, 5, 0, SelectionMetric::Accuracy), Err(EvalError::EmptyGrid)));
        let wrong = grid_search(Family::DT, &[Hyperparams::NB], &d, 5, 0, SelectionMetric::Accuracy);
        assert!(matches!(wrong, Err(EvalError::WrongFamily { index: 0, .. })));
        let bad = Hyperparams::DT(TreeParams { max_depth: None, min_leaf: 0 });
        let err = grid_search(Family::DT, &[bad], &d, 5, 0, SelectionMetric::Accuracy).unwrap_err();
        assert!(matches!(err, EvalError::Cell { index: 0, .. }), "{err}");
    }

    #[test]
    fn default_grids_match_their_family() {
        for f in Family::ALL {
            let g = default_grid(f);
            assert!(!g.is_empty());
            assert!(g.iter().all(|hp| hp.family() == f));
        }
        assert_eq!(default_grid(Family::DT).len(), 8);
        assert_eq!("weighted-f1".parse::<SelectionMetric>().unwrap(), SelectionMetric::WeightedF1);
    }
}
