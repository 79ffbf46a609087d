//! Random forest: bootstrap-bagged CART trees with a random feature subset
//! scanned at every split. Tree `t` draws from its own ChaCha8 stream seeded
//! with `seed + t`, so trees can be grown concurrently and still reproduce.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Tree, TreeParams};
use super::{argmax, ClassifierError, Dataset};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features scanned per split; `None` means ⌈√d⌉.
    pub mtry: Option<usize>,
    /// Disable to train every tree on the full data set (debugging aid).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_leaf: 1, mtry: None, bootstrap: true }
    }
}

impl ForestParams {
    fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.max_depth, min_leaf: self.min_leaf }
    }

    pub fn effective_mtry(&self, d: usize) -> usize {
        self.mtry.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub hyperparams: ForestParams,
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    /// Out-of-bag misclassification rate, when bootstrapping left any rows out.
    pub oob_error: Option<f64>,
}

impl ForestModel {
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    /// Vote shares; the argmax is the majority vote.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let n = self.trees.len().max(1) as f64;
        self.votes(x).into_iter().map(|v| v as f64 / n).collect()
    }
}

struct GrownTree {
    tree: Tree,
    in_bag: Vec<bool>,
}

pub fn train_random_forest(data: &Dataset, hp: &ForestParams, seed: u64) -> Result<ForestModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if hp.n_trees == 0 {
        return Err(ClassifierError::InvalidHyperparameter("n_trees must be at least 1".into()));
    }
    if hp.mtry == Some(0) {
        return Err(ClassifierError::InvalidHyperparameter("mtry must be at least 1".into()));
    }
    let tp = hp.tree_params();
    tp.validate()?;
    let n = data.len();
    let d = data.n_features();
    let mtry = hp.effective_mtry(d);

    let grown: Vec<GrownTree> = par::map_range(hp.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let mut in_bag = vec![!hp.bootstrap; n];
        let idx: Vec<usize> = if hp.bootstrap {
            (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect()
        } else {
            (0..n).collect()
        };
        let mut candidates = |d: usize| -> Vec<usize> {
            if mtry >= d {
                (0..d).collect()
            } else {
                let mut f = sample(&mut rng, d, mtry).into_vec();
                f.sort_unstable();
                f
            }
        };
        let tree = grow(data, idx, &tp, &mut candidates);
        GrownTree { tree, in_bag }
    });

    let oob_error = hp.bootstrap.then(|| oob_error(data, &grown)).flatten();
    Ok(ForestModel {
        hyperparams: *hp,
        trees: grown.into_iter().map(|g| g.tree).collect(),
        n_classes: data.n_classes,
        oob_error,
    })
}

fn oob_error(data: &Dataset, grown: &[GrownTree]) -> Option<f64> {
    let mut evaluated = 0usize;
    let mut wrong = 0usize;
    for (i, x) in data.x.iter().enumerate() {
        let mut votes = vec![0.0; data.n_classes];
        let mut any = false;
        for g in grown.iter().filter(|g| !g.in_bag[i]) {
            votes[g.tree.predict(x)] += 1.0;
            any = true;
        }
        if any {
            evaluated += 1;
            if argmax(&votes) != data.y[i] {
                wrong += 1;
            }
        }
    }
    (evaluated > 0).then(|| wrong as f64 / evaluated as f64)
}
