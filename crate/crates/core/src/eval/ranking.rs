//! Information-gain ranking. Each feature is binarized at the single midpoint
//! threshold that maximizes gain (base-2 entropy); constant features score 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::classifiers::Dataset;
use crate::features::Category;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub category: Option<Category>,
    pub information_gain: f64,
    /// The maximizing split (`x ≤ threshold`); `None` for constant features.
    pub threshold: Option<f64>,
}

/// Features in descending gain order, names ascending within ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn to_table(&self) -> String {
        let w = self.entries.iter().map(|e| e.name.len()).chain([7]).max().unwrap_or(7);
        let mut out = format!("{:>4}  {:w$}  {:9}  {}\n", "rank", "feature", "category", "IG (bits)");
        for (i, e) in self.entries.iter().enumerate() {
            let cat = e.category.map_or("-", Category::name);
            let _ = writeln!(out, "{:>4}  {:w$}  {:9}  {:.6}", i + 1, e.name, cat, e.information_gain);
        }
        out
    }
}

/// Shannon entropy in bits of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum()
}

const GAIN_EPS: f64 = 1e-12;

fn best_split(values: &[f64], y: &[usize], k: usize) -> (f64, Option<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut total = vec![0usize; k];
    y.iter().for_each(|&l| total[l] += 1);
    let h = entropy(&total);
    let n = values.len() as f64;
    let mut left = vec![0usize; k];
    let mut right = total;
    let mut best = (0.0, None);
    for w in 0..order.len().saturating_sub(1) {
        let (i, j) = (order[w], order[w + 1]);
        left[y[i]] += 1;
        right[y[i]] -= 1;
        if values[j] <= values[i] {
            continue;
        }
        let nl = (w + 1) as f64;
        let gain = h - nl / n * entropy(&left) - (n - nl) / n * entropy(&right);
        if best.1.is_none() || gain > best.0 {
            best = (gain, Some((values[i] + values[j]) / 2.0));
        }
    }
    // rounding residue of an exactly uninformative split reads as 0
    let gain = if best.0 < GAIN_EPS { 0.0 } else { best.0 };
    (gain, best.1)
}

pub fn information_gain_ranking(data: &Dataset) -> Result<FeatureRanking, EvalError> {
    let first = data.y.first().copied();
    if data.y.iter().all(|&l| Some(l) == first) {
        return Err(EvalError::SingleClass);
    }
    let mut entries = par::map_range(data.n_features(), |f| {
        let (gain, threshold) = best_split(&data.column(f), &data.y, data.n_classes);
        RankedFeature {
            name: data.features[f].name.clone(),
            category: data.features[f].category,
            information_gain: gain,
            threshold,
        }
    });
    entries.sort_by(|a, b| b.information_gain.total_cmp(&a.information_gain).then_with(|| a.name.cmp(&b.name)));
    Ok(FeatureRanking { entries })
}
