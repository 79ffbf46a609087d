//! One-vs-rest linear SVM.
//!
//! Each binary machine minimizes `(λ/2)·‖w‖² + mean hinge` with `λ = 1/C` over
//! z-scored inputs augmented by a constant 1, so the bias is regularized too
//! and `C → 0` collapses every margin to 0. Optimization is full-batch Pegasos:
//! step `1/(λt)` followed by projection onto the ball of radius `1/√λ`. The
//! full batch makes the result independent of row order, and duplicating the
//! data set leaves every iterate unchanged; the seed is recorded for the
//! artifact but not consumed.

use serde::{Deserialize, Serialize};

use super::logistic::dot;
use super::standardize::Standardizer;
use super::{ClassifierError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, epochs: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub hyperparams: SvmParams,
    pub standardizer: Standardizer,
    /// One row per class; the last entry of each row is the bias.
    pub weights: Vec<Vec<f64>>,
}

impl SvmModel {
    /// Signed margins, one per class.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform(x);
        let d = z.len();
        self.weights.iter().map(|w| dot(&w[..d], &z) + w[d]).collect()
    }
}

pub fn train_linear_svm(data: &Dataset, hp: &SvmParams, _seed: u64) -> Result<SvmModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if !(hp.c >= 0.0 && hp.c.is_finite()) {
        return Err(ClassifierError::InvalidHyperparameter(format!("SVM: C must be finite and >= 0, got {}", hp.c)));
    }
    let standardizer = Standardizer::fit(&data.x);
    let x: Vec<Vec<f64>> = standardizer
        .transform_all(&data.x)
        .into_iter()
        .map(|mut r| {
            r.push(1.0);
            r
        })
        .collect();
    let weights = (0..data.n_classes)
        .map(|c| {
            let y: Vec<f64> = data.y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            pegasos(&x, &y, hp)
        })
        .collect();
    Ok(SvmModel { hyperparams: *hp, standardizer, weights })
}

fn pegasos(x: &[Vec<f64>], y: &[f64], hp: &SvmParams) -> Vec<f64> {
    let d = x[0].len();
    let mut w = vec![0.0; d];
    if hp.c == 0.0 {
        return w;
    }
    let lambda = 1.0 / hp.c;
    let radius = 1.0 / lambda.sqrt();
    let inv_n = 1.0 / x.len() as f64;
    let mut g = vec![0.0; d];
    for t in 1..=hp.epochs {
        let eta = 1.0 / (lambda * t as f64);
        g.iter_mut().for_each(|v| *v = 0.0);
        for (xi, &yi) in x.iter().zip(y) {
            if yi * dot(&w, xi) < 1.0 {
                for (gv, v) in g.iter_mut().zip(xi) {
                    *gv += yi * v;
                }
            }
        }
        let keep = 1.0 - eta * lambda;
        for (wv, gv) in w.iter_mut().zip(&g) {
            *wv = keep * *wv + eta * inv_n * gv;
        }
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two clusters on either side of x0 = 0 with a gap of 1 between them.
    fn clusters(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let class = i % 2;
            let off: f64 = rng.random_range(0.5..2.0);
            let x0 = if class == 0 { -off } else { off };
            x.push(vec![x0, rng.random_range(-2.0..2.0)]);
            y.push(class);
        }
        Dataset::from_rows(x, y, 2).unwrap()
    }

    #[test]
    fn separates_unit_gap_clusters() {
        let d = clusters(5);
        // the gap really is at least 1 wide
        let lo = d.x.iter().zip(&d.y).filter(|(_, &y)| y == 1).map(|(x, _)| x[0]).fold(f64::INFINITY, f64::min);
        let hi = d.x.iter().zip(&d.y).filter(|(_, &y)| y == 0).map(|(x, _)| x[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(lo - hi >= 1.0);
        let m = train_linear_svm(&d, &SvmParams { c: 10.0, epochs: 2000 }, 5).unwrap();
        let acc = d.x.iter().zip(&d.y).filter(|(x, &y)| argmax(&m.scores(x)) == y).count();
        assert_eq!(acc, d.len());
    }

    #[test]
    fn vanishing_c_zeroes_the_margins() {
        let d = clusters(1);
        let m = train_linear_svm(&d, &SvmParams { c: 0.0, epochs: 100 }, 0).unwrap();
        for x in &d.x {
            let s = m.scores(x);
            assert!(s.iter().all(|v| *v == 0.0));
            assert_eq!(argmax(&s), 0);
        }
        let tiny = train_linear_svm(&d, &SvmParams { c: 1e-9, epochs: 100 }, 0).unwrap();
        assert!(tiny.weights.iter().flatten().all(|w| w.abs() < 1e-8));
    }

    #[test]
    fn duplicated_data_gives_the_same_decisions() {
        let d = clusters(2);
        let twice =
            Dataset::from_rows(d.x.iter().chain(&d.x).cloned().collect(), d.y.iter().chain(&d.y).copied().collect(), 2)
                .unwrap();
        let hp = SvmParams::default();
        let a = train_linear_svm(&d, &hp, 0).unwrap();
        let b = train_linear_svm(&twice, &hp, 0).unwrap();
        for (wa, wb) in a.weights.iter().flatten().zip(b.weights.iter().flatten()) {
            assert!((wa - wb).abs() < 1e-9, "{wa} vs {wb}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let q = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            assert_eq!(argmax(&a.scores(&q)), argmax(&b.scores(&q)));
        }
    }

    #[test]
    fn rejects_negative_c() {
        let d = clusters(0);
        assert!(train_linear_svm(&d, &SvmParams { c: -1.0, epochs: 1 }, 0).is_err());
    }
}
