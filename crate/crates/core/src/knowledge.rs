//! Knowledge-state and knowledge-gain labels from pre/post test scores, and
//! feature selection for the knowledge classification task.
//!
//! Knowledge file: `#session-miner-knowledge v1` header, then
//! `session_id<TAB>pre<TAB>post` with scores in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierError, Dataset, Hyperparams};
use crate::eval::{cross_validate, information_gain_ranking, EvalError};
use crate::features::FeatureMatrix;
use crate::par;

pub const KNOWLEDGE_HEADER: &str = "#session-miner-knowledge v1";

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("LengthMismatch: {responses} responses for {key} key entries")]
    LengthMismatch { responses: usize, key: usize },
    #[error("EmptyTest: a test needs at least one question")]
    EmptyTest,
    #[error("session {session_id}: {what} score {value} outside [0, 1]")]
    ScoreOutOfRange { session_id: String, what: &'static str, value: f64 },
    #[error("tertile thresholds need at least 3 records, got {0}")]
    TooFewRecords(usize),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("missing or wrong format header: expected {KNOWLEDGE_HEADER:?}, found {0:?}")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate session {session_id}")]
    DuplicateSession { line: usize, session_id: String },
    #[error("budget {budget} exceeds the {size} available features")]
    BudgetTooLarge { budget: usize, size: usize },
    #[error("no labeled sessions: none of the feature rows has a knowledge record")]
    NoOverlap,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Fraction of responses equal to the key.
pub fn score_test<T: PartialEq>(responses: &[T], key: &[T]) -> Result<f64, KnowledgeError> {
    if responses.len() != key.len() {
        return Err(KnowledgeError::LengthMismatch { responses: responses.len(), key: key.len() });
    }
    if key.is_empty() {
        return Err(KnowledgeError::EmptyTest);
    }
    let correct = responses.iter().zip(key).filter(|(r, k)| r == k).count();
    Ok(correct as f64 / key.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Moderate,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Moderate, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Moderate => "moderate",
            Level::High => "high",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown knowledge level {s:?} (expected low, moderate or high)"))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub session_id: String,
    pub pre: f64,
    pub post: f64,
    pub state: Option<Level>,
    pub gain_class: Option<Level>,
}

impl KnowledgeRecord {
    pub fn new(session_id: impl Into<String>, pre: f64, post: f64) -> Result<Self, KnowledgeError> {
        let session_id = session_id.into();
        for (what, value) in [("pre", pre), ("post", post)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(KnowledgeError::ScoreOutOfRange { session_id, what, value });
            }
        }
        Ok(Self { session_id, pre, post, state: None, gain_class: None })
    }

    pub fn gain(&self) -> f64 {
        self.post - self.pre
    }
}

/// Two cut points: `v ≤ t1` is Low, `v ≤ t2` is Moderate, otherwise High.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuts {
    pub t1: f64,
    pub t2: f64,
}

impl Cuts {
    pub const DEFAULT_STATE: Cuts = Cuts { t1: 0.4, t2: 0.7 };
    pub const DEFAULT_GAIN: Cuts = Cuts { t1: 0.05, t2: 0.25 };

    pub fn level(&self, v: f64) -> Level {
        if v <= self.t1 {
            Level::Low
        } else if v <= self.t2 {
            Level::Moderate
        } else {
            Level::High
        }
    }

    fn check(&self, what: &str, lo: f64, hi: f64) -> Result<(), KnowledgeError> {
        if self.t1 < self.t2 && self.t1 >= lo && self.t2 <= hi {
            Ok(())
        } else {
            Err(KnowledgeError::InvalidThresholds(format!(
                "{what} cuts must satisfy {lo} <= t1 < t2 <= {hi}, got {} and {}",
                self.t1, self.t2
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum ThresholdPolicy {
    /// Empirical 1/3 and 2/3 quantiles of the input set.
    #[default]
    Tertile,
    Fixed {
        state: Cuts,
        gain: Cuts,
    },
}

impl ThresholdPolicy {
    pub fn fixed_defaults() -> Self {
        ThresholdPolicy::Fixed { state: Cuts::DEFAULT_STATE, gain: Cuts::DEFAULT_GAIN }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThresholdPolicy::Tertile => "tertile",
            ThresholdPolicy::Fixed { .. } => "fixed",
        }
    }
}

/// The cut points actually applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub policy: String,
    pub state: Cuts,
    pub gain: Cuts,
    /// Targets whose tertile cuts coincided and were replaced by the defaults.
    pub fallback: Vec<String>,
}

/// Order-statistic tertiles: `t1 = v[⌈n/3⌉−1]`, `t2 = v[⌈2n/3⌉−1]` of the
/// sorted values. With distinct values the three classes get sizes that
/// differ by at most one.
pub fn tertile_cuts(values: &[f64]) -> Cuts {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Cuts { t1: v[n.div_ceil(3) - 1], t2: v[(2 * n).div_ceil(3) - 1] }
}

pub fn assign_classes(
    records: &[KnowledgeRecord],
    policy: &ThresholdPolicy,
) -> Result<(Vec<KnowledgeRecord>, ClassThresholds), KnowledgeError> {
    let (state, gain, fallback) = match policy {
        ThresholdPolicy::Fixed { state, gain } => {
            state.check("state", 0.0, 1.0)?;
            gain.check("gain", -1.0, 1.0)?;
            (*state, *gain, Vec::new())
        }
        ThresholdPolicy::Tertile => {
            if records.len() < 3 {
                return Err(KnowledgeError::TooFewRecords(records.len()));
            }
            let mut fallback = Vec::new();
            let mut pick = |name: &str, values: Vec<f64>, default: Cuts| {
                let c = tertile_cuts(&values);
                if c.t1 < c.t2 {
                    c
                } else {
                    log::warn!(
                        "DegenerateDistribution: {name} tertile cuts coincide at {}; using fixed defaults {} / {}",
                        c.t1,
                        default.t1,
                        default.t2
                    );
                    fallback.push(name.to_string());
                    default
                }
            };
            let state = pick("state", records.iter().map(|r| r.post).collect(), Cuts::DEFAULT_STATE);
            let gain = pick("gain", records.iter().map(KnowledgeRecord::gain).collect(), Cuts::DEFAULT_GAIN);
            (state, gain, fallback)
        }
    };
    let out = records
        .iter()
        .map(|r| KnowledgeRecord {
            state: Some(state.level(r.post)),
            gain_class: Some(gain.level(r.gain())),
            ..r.clone()
        })
        .collect();
    Ok((out, ClassThresholds { policy: policy.name().into(), state, gain, fallback }))
}

pub fn read_knowledge<R: BufRead>(reader: R) -> Result<Vec<KnowledgeRecord>, KnowledgeError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 {
            if line.trim_end_matches('\r') != KNOWLEDGE_HEADER {
                return Err(KnowledgeError::BadHeader(line));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| KnowledgeError::Malformed { line: lineno, reason };
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let [sid, pre, post] = cols[..] else {
            return Err(malformed(format!("expected 3 tab-separated columns, found {}", cols.len())));
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| malformed(format!("{s:?}: {e}")));
        let rec = KnowledgeRecord::new(sid.trim(), num(pre)?, num(post)?)?;
        if !seen.insert(rec.session_id.clone()) {
            return Err(KnowledgeError::DuplicateSession { line: lineno, session_id: rec.session_id });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_knowledge<W: Write>(records: &[KnowledgeRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{KNOWLEDGE_HEADER}")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.session_id, r.pre, r.post)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    State,
    Gain,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::State => "state",
            Target::Gain => "gain",
        }
    }
}

/// Joins classified records to feature rows by session id; rows without a
/// record are skipped.
pub fn knowledge_dataset(
    matrix: &FeatureMatrix,
    records: &[KnowledgeRecord],
    target: Target,
) -> Result<Dataset, KnowledgeError> {
    let by_id: BTreeMap<&str, Level> = records
        .iter()
        .filter_map(|r| {
            let level = match target {
                Target::State => r.state,
                Target::Gain => r.gain_class,
            }?;
            Some((r.session_id.as_str(), level))
        })
        .collect();
    let mut m = matrix.clone();
    m.has_labels = true;
    m.rows.retain(|row| by_id.contains_key(row.session_id.as_str()));
    if m.rows.is_empty() {
        return Err(KnowledgeError::NoOverlap);
    }
    for row in &mut m.rows {
        row.label = Some(by_id[row.session_id.as_str()].name().to_string());
    }
    let level_index = |s: &str| s.parse::<Level>().ok().map(Level::index);
    Ok(Dataset::from_matrix(&m, Level::ALL.len(), level_index)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    IgTopK,
    GreedyForward,
}

impl std::str::FromStr for SelectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ig-top-k" => Ok(SelectionMethod::IgTopK),
            "greedy-forward" => Ok(SelectionMethod::GreedyForward),
            _ => Err(format!("unknown selection method {s:?} (expected ig-top-k or greedy-forward)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub method: SelectionMethod,
    /// Column indices in selection order.
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    /// Greedy-forward only: CV accuracy after each addition.
    pub trace: Vec<f64>,
}

/// `ig-top-k` keeps the `budget` highest-gain features. `greedy-forward`
/// starts empty and repeatedly adds the feature whose inclusion gives the best
/// `k_folds` CV accuracy for `model` (ties to the lowest column index); the
/// first feature is always taken, later ones only on strict improvement.
pub fn select_features(
    data: &Dataset,
    method: SelectionMethod,
    budget: usize,
    model: &Hyperparams,
    k_folds: usize,
    seed: u64,
) -> Result<FeatureSelection, KnowledgeError> {
    let d = data.n_features();
    if budget > d {
        return Err(KnowledgeError::BudgetTooLarge { budget, size: d });
    }
    let (indices, trace) = match method {
        SelectionMethod::IgTopK => {
            let ranking = information_gain_ranking(data)?;
            let idx = ranking
                .entries
                .iter()
                .take(budget)
                .map(|e| data.features.iter().position(|f| f.name == e.name).expect("ranked feature exists"))
                .collect();
            (idx, Vec::new())
        }
        SelectionMethod::GreedyForward => {
            let mut chosen: Vec<usize> = Vec::new();
            let mut trace: Vec<f64> = Vec::new();
            while chosen.len() < budget {
                let candidates: Vec<usize> = (0..d).filter(|c| !chosen.contains(c)).collect();
                let scores = par::try_map_slice(&candidates, |&c| {
                    let mut cols = chosen.clone();
                    cols.push(c);
                    cross_validate(model, &data.select_columns(&cols), k_folds, seed).map(|o| o.mean_accuracy())
                })?;
                let mut best = 0;
                for (i, s) in scores.iter().enumerate().skip(1) {
                    if *s > scores[best] {
                        best = i;
                    }
                }
                if trace.last().is_some_and(|&prev| scores[best] <= prev) {
                    break;
                }
                chosen.push(candidates[best]);
                trace.push(scores[best]);
            }
            (chosen, trace)
        }
    };
    let names = indices.iter().map(|&i| data.features[i].name.clone()).collect();
    Ok(FeatureSelection { method, indices, names, trace })
}
