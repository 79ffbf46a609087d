//! Gaussian naive Bayes with a variance floor, scored in log space.

use serde::{Deserialize, Serialize};

use super::{softmax_in_place, ClassifierError, Dataset};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    /// Empirical class frequencies; absent classes have prior 0.
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl BayesModel {
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&p, (mu, var))| {
                if p == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let ll: f64 = x
                    .iter()
                    .zip(mu.iter().zip(var))
                    .map(|(v, (m, s2))| -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m) * (v - m) / s2))
                    .sum();
                p.ln() + ll
            })
            .collect()
    }

    /// Posterior class probabilities.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.log_joint(x);
        softmax_in_place(&mut s);
        s
    }
}

pub fn train_naive_bayes(data: &Dataset) -> Result<BayesModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let k = data.n_classes;
    let d = data.n_features();
    let counts = data.class_counts();
    let mut means = vec![vec![0.0; d]; k];
    for (x, &y) in data.x.iter().zip(&data.y) {
        for (m, v) in means[y].iter_mut().zip(x) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c.max(1) as f64);
    }
    let mut variances = vec![vec![0.0; d]; k];
    for (x, &y) in data.x.iter().zip(&data.y) {
        for ((s, v), m) in variances[y].iter_mut().zip(x).zip(&means[y]) {
            *s += (v - m) * (v - m);
        }
    }
    for (s, &c) in variances.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v = (*v / c.max(1) as f64).max(VARIANCE_FLOOR));
    }
    let n = data.len() as f64;
    Ok(BayesModel { priors: counts.iter().map(|&c| c as f64 / n).collect(), means, variances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;
    use proptest::prelude::*;

    #[test]
    fn single_class_collapses_the_prior() {
        let d = Dataset::from_rows(vec![vec![1.0, 2.0], vec![3.0, -1.0]], vec![2, 2], 3).unwrap();
        let m = train_naive_bayes(&d).unwrap();
        for q in [[0.0, 0.0], [100.0, -50.0], [1e9, 1e9]] {
            let s = m.scores(&q);
            assert_eq!(s, vec![0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn indicative_binary_feature() {
        // f0 equals the class; f1 is shared noise
        let x = vec![vec![0.0, 1.0], vec![0.0, 3.0], vec![1.0, 1.0], vec![1.0, 3.0]];
        let d = Dataset::from_rows(x, vec![0, 0, 1, 1], 2).unwrap();
        let m = train_naive_bayes(&d).unwrap();
        assert_eq!(m.variances[0][0], VARIANCE_FLOOR);
        // hand computation: equal priors, identical f1 terms, so the log-odds
        // at f0 = 0 is (1 - 0)^2 / (2 * 1e-9) = 5e8
        let lj = m.log_joint(&[0.0, 2.0]);
        assert!(((lj[0] - lj[1]) - 5e8).abs() < 1e-3);
        assert!(m.scores(&[0.0, 2.0])[0] > 0.99);
        assert!(m.scores(&[1.0, 2.0])[1] > 0.99);
    }

    proptest! {
        #[test]
        fn posteriors_are_a_simplex(
            rows in prop::collection::vec((prop::collection::vec(-50.0f64..50.0, 3), 0usize..3), 1..30),
            q in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let m = train_naive_bayes(&Dataset::from_rows(x, y, 3).unwrap()).unwrap();
            let s = m.scores(&q);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(s.iter().all(|p| *p >= 0.0));
            prop_assert!(m.priors[argmax(&s)] > 0.0);
        }
    }
}
