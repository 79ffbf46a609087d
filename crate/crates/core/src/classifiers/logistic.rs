//! Multinomial (softmax) logistic regression.
//!
//! Objective: mean cross-entropy + (l2/2)·‖W‖², bias unpenalized. Training is
//! full-batch gradient descent from zero weights on z-scored inputs; the L2
//! term is applied as a proximal shrink `W ← (W − lr·∇data)/(1 + lr·l2)`, which
//! has the same fixed point as a plain gradient step and stays stable for any
//! penalty strength. Iteration stops once every gradient component is below
//! `tol` in magnitude.

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{softmax_in_place, ClassifierError, Dataset, Family};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { l2: 1e-3, lr: 0.5, max_iter: 1000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub hyperparams: LogisticParams,
    pub standardizer: Standardizer,
    /// `n_classes × n_features`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

impl LogisticModel {
    /// Class probabilities.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform(x);
        let mut logits: Vec<f64> = self.weights.iter().zip(&self.bias).map(|(w, b)| b + dot(w, &z)).collect();
        softmax_in_place(&mut logits);
        logits
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradient at `theta = [W row-major (k·d), b (k)]` over already
/// standardized rows `x`.
pub fn objective(theta: &[f64], x: &[Vec<f64>], y: &[usize], k: usize, l2: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    debug_assert_eq!(theta.len(), k * d + k);
    let (w, b) = theta.split_at(k * d);
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut p = vec![0.0; k];
    for (xi, &yi) in x.iter().zip(y) {
        for c in 0..k {
            p[c] = b[c] + dot(&w[c * d..(c + 1) * d], xi);
        }
        let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - p[yi];
        for c in 0..k {
            let r = (p[c] - lse).exp() - if c == yi { 1.0 } else { 0.0 };
            for (g, v) in grad[c * d..(c + 1) * d].iter_mut().zip(xi) {
                *g += r * v;
            }
            grad[k * d + c] += r;
        }
    }
    let inv_n = 1.0 / n.max(1) as f64;
    loss *= inv_n;
    grad.iter_mut().for_each(|g| *g *= inv_n);
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in grad[..k * d].iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, grad)
}

pub fn train_logistic_regression(data: &Dataset, hp: &LogisticParams) -> Result<LogisticModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if !(hp.l2 >= 0.0 && hp.l2.is_finite() && hp.lr > 0.0 && hp.lr.is_finite() && hp.tol >= 0.0) {
        return Err(ClassifierError::InvalidHyperparameter(format!("LR: {hp:?}")));
    }
    let standardizer = Standardizer::fit(&data.x);
    let x = standardizer.transform_all(&data.x);
    let k = data.n_classes;
    let d = data.n_features();
    let mut theta = vec![0.0; k * d + k];
    let mut iterations = 0;
    while iterations < hp.max_iter {
        let (loss, grad) = objective(&theta, &x, &data.y, k, hp.l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ClassifierError::NonFiniteLoss { family: Family::LR, iteration: iterations });
        }
        if grad.iter().all(|g| g.abs() < hp.tol) {
            break;
        }
        let shrink = 1.0 + hp.lr * hp.l2;
        for (i, (t, g)) in theta.iter_mut().zip(&grad).enumerate() {
            if i < k * d {
                let data_grad = g - hp.l2 * *t;
                *t = (*t - hp.lr * data_grad) / shrink;
            } else {
                *t -= hp.lr * g;
            }
        }
        iterations += 1;
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(ClassifierError::NonFiniteLoss { family: Family::LR, iteration: iterations });
    }
    let (w, b) = theta.split_at(k * d);
    Ok(LogisticModel {
        hyperparams: *hp,
        standardizer,
        weights: (0..k).map(|c| w[c * d..(c + 1) * d].to_vec()).collect(),
        bias: b.to_vec(),
        iterations,
    })
}
