//! One-hidden-layer perceptron: tanh hidden units, softmax output, mean
//! cross-entropy + (l2/2)·(‖W1‖² + ‖W2‖²), full-batch gradient descent.
//! Weights start uniform in (−0.1, 0.1) from a ChaCha8 stream seeded with the
//! training seed; biases start at 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::dot;
use super::standardize::Standardizer;
use super::{softmax_in_place, ClassifierError, Dataset, Family};

pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: 16, lr: 0.5, epochs: 500, l2: 1e-4 }
    }
}

/// Layer shapes for the flat parameter layout `[W1 (h×d), b1 (h), W2 (k×h), b2 (k)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub d: usize,
    pub h: usize,
    pub k: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.h * self.d + self.h + self.k * self.h + self.k
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = theta.split_at(self.h * self.d);
        let (b1, rest) = rest.split_at(self.h);
        let (w2, b2) = rest.split_at(self.k * self.h);
        (w1, b1, w2, b2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub hyperparams: MlpParams,
    pub standardizer: Standardizer,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    /// Class probabilities.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform(x);
        let a: Vec<f64> = self.w1.iter().zip(&self.b1).map(|(w, b)| (b + dot(w, &z)).tanh()).collect();
        let mut o: Vec<f64> = self.w2.iter().zip(&self.b2).map(|(w, b)| b + dot(w, &a)).collect();
        softmax_in_place(&mut o);
        o
    }
}

/// Loss and gradient of the training objective at a flat parameter vector,
/// over already standardized rows.
pub fn objective(theta: &[f64], shape: Shape, x: &[Vec<f64>], y: &[usize], l2: f64) -> (f64, Vec<f64>) {
    let Shape { d, h, k } = shape;
    debug_assert_eq!(theta.len(), shape.len());
    let (w1, b1, w2, b2) = shape.split(theta);
    let mut grad = vec![0.0; theta.len()];
    let (gw1, rest) = grad.split_at_mut(h * d);
    let (gb1, rest) = rest.split_at_mut(h);
    let (gw2, gb2) = rest.split_at_mut(k * h);
    let mut a = vec![0.0; h];
    let mut o = vec![0.0; k];
    let mut da = vec![0.0; h];
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        for j in 0..h {
            a[j] = (b1[j] + dot(&w1[j * d..(j + 1) * d], xi)).tanh();
        }
        for c in 0..k {
            o[c] = b2[c] + dot(&w2[c * h..(c + 1) * h], &a);
        }
        let m = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + o.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - o[yi];
        da.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..k {
            let r = (o[c] - lse).exp() - if c == yi { 1.0 } else { 0.0 };
            gb2[c] += r;
            for j in 0..h {
                gw2[c * h + j] += r * a[j];
                da[j] += r * w2[c * h + j];
            }
        }
        for j in 0..h {
            let dz = da[j] * (1.0 - a[j] * a[j]);
            gb1[j] += dz;
            for (g, v) in gw1[j * d..(j + 1) * d].iter_mut().zip(xi) {
                *g += dz * v;
            }
        }
    }
    let inv_n = 1.0 / x.len().max(1) as f64;
    loss *= inv_n;
    grad.iter_mut().for_each(|g| *g *= inv_n);
    let mut sq = 0.0;
    for range in [0..h * d, h * d + h..h * d + h + k * h] {
        for i in range {
            sq += theta[i] * theta[i];
            grad[i] += l2 * theta[i];
        }
    }
    (loss + 0.5 * l2 * sq, grad)
}

pub fn train_mlp(data: &Dataset, hp: &MlpParams, seed: u64) -> Result<MlpModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if hp.hidden == 0 || !(hp.lr > 0.0 && hp.lr.is_finite() && hp.l2 >= 0.0 && hp.l2.is_finite()) {
        return Err(ClassifierError::InvalidHyperparameter(format!("MP: {hp:?}")));
    }
    let standardizer = Standardizer::fit(&data.x);
    let x = standardizer.transform_all(&data.x);
    let shape = Shape { d: data.n_features(), h: hp.hidden, k: data.n_classes };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; shape.len()];
    let (d, h, k) = (shape.d, shape.h, shape.k);
    for i in (0..h * d).chain(h * d + h..h * d + h + k * h) {
        theta[i] = rng.random_range(-INIT_SCALE..INIT_SCALE);
    }
    for epoch in 0..hp.epochs {
        let (loss, grad) = objective(&theta, shape, &x, &data.y, hp.l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ClassifierError::NonFiniteLoss { family: Family::MP, iteration: epoch });
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= hp.lr * g;
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(ClassifierError::NonFiniteLoss { family: Family::MP, iteration: hp.epochs });
    }
    let (w1, b1, w2, b2) = shape.split(&theta);
    Ok(MlpModel {
        hyperparams: *hp,
        standardizer,
        w1: (0..h).map(|j| w1[j * d..(j + 1) * d].to_vec()).collect(),
        b1: b1.to_vec(),
        w2: (0..k).map(|c| w2[c * h..(c + 1) * h].to_vec()).collect(),
        b2: b2.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;

    fn xor() -> Dataset {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        Dataset::from_rows(x, vec![0, 1, 1, 0], 2).unwrap()
    }

    fn accuracy(m: &MlpModel, d: &Dataset) -> f64 {
        d.x.iter().zip(&d.y).filter(|(x, &y)| argmax(&m.scores(x)) == y).count() as f64 / d.len() as f64
    }

    #[test]
    fn learns_xor() {
        let d = xor();
        let hp = MlpParams { hidden: 4, lr: 0.5, epochs: 3000, l2: 0.0 };
        let solved: Vec<u64> = (0..10).filter(|&s| accuracy(&train_mlp(&d, &hp, s).unwrap(), &d) == 1.0).collect();
        assert!(solved.contains(&0), "seeds that solve XOR: {solved:?}");
    }

    #[test]
    fn untrained_output_is_near_uniform() {
        let d = Dataset::from_rows(
            (0..50).map(|i| vec![(i as f64 * 0.37).sin() * 10.0, i as f64]).collect(),
            (0..50).map(|i| i % 3).collect(),
            3,
        )
        .unwrap();
        for hidden in [2, 4] {
            let m = train_mlp(&d, &MlpParams { hidden, epochs: 0, ..Default::default() }, 17).unwrap();
            for x in &d.x {
                assert!(m.scores(x).iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-2));
            }
        }
    }

    #[test]
    fn same_seed_same_artifact() {
        let d = xor();
        let hp = MlpParams { hidden: 4, epochs: 50, ..Default::default() };
        let a = serde_json::to_string(&train_mlp(&d, &hp, 3).unwrap()).unwrap();
        let b = serde_json::to_string(&train_mlp(&d, &hp, 3).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let d = xor();
        let r = train_mlp(&d, &MlpParams { hidden: 4, lr: 1e305, epochs: 20, l2: 1.0 }, 0);
        assert!(matches!(r, Err(ClassifierError::NonFiniteLoss { family: Family::MP, .. })), "{r:?}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let shape = Shape { d: 3, h: 4, k: 3 };
            let x: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let y: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
            let theta: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = objective(&theta, shape, &x, &y, 0.05);
            for j in 0..theta.len() {
                let eps = 1e-5;
                let mut tp = theta.clone();
                tp[j] += eps;
                let mut tm = theta.clone();
                tm[j] -= eps;
                let fd = (objective(&tp, shape, &x, &y, 0.05).0 - objective(&tm, shape, &x, &y, 0.05).0) / (2.0 * eps);
                let rel = (fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {j}: analytic {} vs fd {fd}", g[j]);
            }
        }
    }
}
