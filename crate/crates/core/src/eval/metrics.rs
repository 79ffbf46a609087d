use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// `counts[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    /// Averages weighted by gold-class support.
    pub weighted: Averages,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn div0(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn evaluate(gold: &[usize], predicted: &[usize], k: usize) -> Result<EvalReport, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { gold: gold.len(), predicted: predicted.len() });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(predicted) {
        if let Some(&label) = [g, p].iter().find(|&&l| l >= k) {
            return Err(EvalError::LabelOutOfRange { label, k });
        }
        counts[g][p] += 1;
    }
    let confusion = ConfusionMatrix { counts };
    let total = gold.len() as f64;
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion.counts[c][c] as f64;
            let support: usize = confusion.counts[c].iter().sum();
            let predicted_c: usize = confusion.counts.iter().map(|r| r[c]).sum();
            let precision = div0(tp, predicted_c as f64);
            let recall = div0(tp, support as f64);
            let f1 = div0(2.0 * precision * recall, precision + recall);
            ClassMetrics { precision, recall, f1, support }
        })
        .collect();
    let w = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total;
    let weighted = Averages { precision: w(|m| m.precision), recall: w(|m| m.recall), f1: w(|m| m.f1) };
    let accuracy = confusion.trace() as f64 / total;
    Ok(EvalReport { per_class, weighted, accuracy, confusion })
}

/// Aligned text table, one row per model: per-class P/R/F1, the weighted
/// averages and accuracy.
pub fn render_table(rows: &[(String, &EvalReport)], class_names: &[&str]) -> String {
    const CELL: usize = 6;
    let name_w = rows.iter().map(|(n, _)| n.len()).chain([5]).max().unwrap_or(5);
    let group_w = 3 * CELL + 2;
    let mut out = String::new();
    let _ = write!(out, "{:name_w$}", "");
    for g in class_names.iter().copied().chain(["Weighted average"]) {
        let _ = write!(out, " | {g:<group_w$}");
    }
    let _ = writeln!(out, " | {:<CELL$}", "All");
    let _ = write!(out, "{:name_w$}", "Model");
    for _ in 0..=class_names.len() {
        let _ = write!(out, " | {:<CELL$} {:<CELL$} {:<CELL$}", "P", "R", "F1");
    }
    let _ = writeln!(out, " | {:<CELL$}", "Accu");
    for (name, r) in rows {
        let _ = write!(out, "{name:name_w$}");
        let groups = r.per_class.iter().map(|m| (m.precision, m.recall, m.f1));
        for (p, rc, f) in groups.chain([(r.weighted.precision, r.weighted.recall, r.weighted.f1)]) {
            let _ = write!(out, " | {p:<CELL$.3} {rc:<CELL$.3} {f:<CELL$.3}");
        }
        let _ = writeln!(out, " | {:<CELL$.3}", r.accuracy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_classifier() {
        let g = [2, 0, 1, 1, 2];
        let r = evaluate(&g, &g, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
    }

    #[test]
    fn total_failure() {
        let r = evaluate(&[1, 1, 1], &[0, 0, 0], 2).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.per_class[1].recall, 0.0);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.per_class[1].precision, 0.0);
    }

    #[test]
    fn hand_computed_three_class_example() {
        let r = evaluate(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0], 3).unwrap();
        assert_eq!(r.confusion.counts, vec![vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 1]]);
        assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-12);
        let expect = [(0.5, 0.5, 0.5), (2.0 / 3.0, 1.0, 0.8), (1.0, 0.5, 2.0 / 3.0)];
        for (m, (p, rc, f)) in r.per_class.iter().zip(expect) {
            assert!((m.precision - p).abs() < 1e-12 && (m.recall - rc).abs() < 1e-12 && (m.f1 - f).abs() < 1e-12);
        }
        assert!((r.weighted.f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((r.weighted.f1 - 0.6556).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[0], &[0, 1], 2), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(evaluate(&[], &[], 2), Err(EvalError::EmptyInput)));
        assert!(matches!(evaluate(&[0], &[3], 2), Err(EvalError::LabelOutOfRange { label: 3, k: 2 })));
    }

    #[test]
    fn table_has_every_cell() {
        let r = evaluate(&[0, 1, 2], &[0, 1, 1], 3).unwrap();
        let t = render_table(&[("SVM".into(), &r)], &["Navigational", "Informational", "Transactional"]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("Weighted average") && lines[0].contains("All"));
        assert_eq!(lines[1].matches(" P ").count(), 4);
        assert!(lines[1].trim_end().ends_with("Accu"));
        // 4 groups × 3 values + accuracy
        assert_eq!(lines[2].split_whitespace().filter(|w| w.parse::<f64>().is_ok()).count(), 13);
    }

    fn labelled() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..3, n), prop::collection::vec(0usize..3, n)))
    }

    proptest! {
        #[test]
        fn internally_consistent((g, p) in labelled()) {
            let r = evaluate(&g, &p, 3).unwrap();
            prop_assert_eq!(r.confusion.total(), g.len());
            prop_assert!((r.accuracy - r.confusion.trace() as f64 / g.len() as f64).abs() < 1e-12);
            prop_assert!((r.accuracy - r.weighted.recall).abs() < 1e-12);
            for (c, m) in r.per_class.iter().enumerate() {
                prop_assert_eq!(m.support, g.iter().filter(|&&l| l == c).count());
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn permutation_invariant((g, p) in labelled(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..g.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let g2: Vec<usize> = order.iter().map(|&i| g[i]).collect();
            let p2: Vec<usize> = order.iter().map(|&i| p[i]).collect();
            let a = evaluate(&g, &p, 3).unwrap();
            let b = evaluate(&g2, &p2, 3).unwrap();
            prop_assert_eq!(a.confusion, b.confusion);
            prop_assert!((a.weighted.f1 - b.weighted.f1).abs() < 1e-12);
        }
    }
}
