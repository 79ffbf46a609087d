//! CART decision trees on axis-aligned thresholds with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values.
//! The split with the lowest weighted child impurity wins, ties going to the
//! lower feature index and then the lower threshold. An impure node is split
//! even when no candidate lowers impurity (XOR-style data needs this), as long
//! as depth and leaf-size limits allow.

use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierError, Dataset};

/// 1 − Σ pᵢ².
pub fn gini(counts: &[usize]) -> Result<f64, ClassifierError> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(ClassifierError::AllZero);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Minimum instances on each side of a split.
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_leaf: 1 }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<(), ClassifierError> {
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidHyperparameter("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(counts: Vec<usize>) -> Self {
        Self { nodes: vec![Node::Leaf { counts }] }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let counts: Vec<f64> = self.leaf_counts(x).iter().map(|&c| c as f64).collect();
        argmax(&counts)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub hyperparams: TreeParams,
    pub tree: Tree,
}

impl TreeModel {
    /// Leaf class distribution.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.tree.leaf_counts(x);
        let n: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
    }
}

pub fn train_decision_tree(data: &Dataset, hp: &TreeParams) -> Result<TreeModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    hp.validate()?;
    let all: Vec<usize> = (0..data.n_features()).collect();
    let tree = grow(data, (0..data.len()).collect(), hp, &mut |_| all.clone());
    Ok(TreeModel { hyperparams: *hp, tree })
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grows a tree over the rows `idx` (repeats allowed). `candidates` is asked
/// for the features to scan at each node it tries to split; returned indices
/// must be ascending.
pub(crate) fn grow(
    data: &Dataset,
    idx: Vec<usize>,
    hp: &TreeParams,
    candidates: &mut dyn FnMut(usize) -> Vec<usize>,
) -> Tree {
    let mut nodes = Vec::new();
    grow_node(data, idx, 0, hp, candidates, &mut nodes);
    Tree { nodes }
}

fn grow_node(
    data: &Dataset,
    idx: Vec<usize>,
    depth: usize,
    hp: &TreeParams,
    candidates: &mut dyn FnMut(usize) -> Vec<usize>,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let mut counts = vec![0usize; data.n_classes];
    for &i in &idx {
        counts[data.y[i]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let depth_ok = hp.max_depth.is_none_or(|d| depth < d);
    nodes.push(Node::Leaf { counts: counts.clone() });
    if pure || !depth_ok || idx.len() < 2 * hp.min_leaf {
        return id;
    }
    let features = candidates(data.n_features());
    let Some(best) = best_split(data, &idx, &features, hp.min_leaf) else {
        return id;
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        idx.into_iter().partition(|&i| data.x[i][best.feature] <= best.threshold);
    let l = grow_node(data, left, depth + 1, hp, candidates, nodes);
    let r = grow_node(data, right, depth + 1, hp, candidates, nodes);
    nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
    id
}

/// Sum of n_child · gini(child) over both children, from class counts.
fn weighted_impurity(left: &[usize], right: &[usize]) -> f64 {
    let part = |c: &[usize]| {
        let n: usize = c.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let sq: f64 = c.iter().map(|&v| (v as f64) * (v as f64)).sum();
        n as f64 - sq / n as f64
    };
    part(left) + part(right)
}

fn best_split(data: &Dataset, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    const TIE_EPS: f64 = 1e-12;
    let n = idx.len();
    let k = data.n_classes;
    let mut total = vec![0usize; k];
    for &i in idx {
        total[data.y[i]] += 1;
    }
    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &f in features {
        order.clear();
        order.extend(idx.iter().map(|&i| (data.x[i][f], data.y[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = vec![0usize; k];
        let mut right = total.clone();
        for p in 1..n {
            let (prev, label) = order[p - 1];
            left[label] += 1;
            right[label] -= 1;
            let next = order[p].0;
            if next <= prev || p < min_leaf || n - p < min_leaf {
                continue;
            }
            let score = weighted_impurity(&left, &right) / n as f64;
            if best.is_none_or(|b| score < b.score - TIE_EPS) {
                let mut threshold = prev + (next - prev) / 2.0;
                if threshold >= next {
                    threshold = prev;
                }
                best = Some(SplitChoice { feature: f, threshold, score });
            }
        }
    }
    best
}
