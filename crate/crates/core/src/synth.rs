//! Seeded synthetic corpora with per-intent behavior profiles.
//!
//! Class counts are allocated by largest-remainder rounding of the mix (ties
//! to the lower class index) and dealt to session slots by a shuffle drawn
//! from stream 1 of the root seed. Session `i` then draws everything from its
//! own ChaCha8 stream seeded with `seed + i`, so sessions are generated in
//! parallel and the output is still a pure function of the config.
//!
//! Session `i` belongs to user `u{i mod n_users}` and starts `i` days after a
//! fixed epoch, so both the explicit `sid` and gap segmentation recover it.
//! Query terms come from a synthetic vocabulary (`w0`, `w1`, ...); clicked
//! URLs either embed query terms or name an unrelated site.

use std::io;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{event_to_line, write_labels, LABELS_HEADER, LOG_HEADER};
use crate::knowledge::{write_knowledge, KnowledgeRecord};
use crate::model::{Click, Event, EventPayload, IntentClass, MouseActivity, PageView};
use crate::par;

/// 2020-09-13T12:26:40Z.
pub const EPOCH_MS: u64 = 1_600_000_000_000;
pub const DAY_MS: u64 = 86_400_000;
pub const DEFAULT_INFORMATIONAL_SHARE: f64 = 0.497;
const VOCABULARY: usize = 5000;
const TOPIC_TERMS: usize = 12;
const SITES: usize = 400;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One value per intent class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub navigational: T,
    pub informational: T,
    pub transactional: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, c: IntentClass) -> &T {
        match c {
            IntentClass::Navigational => &self.navigational,
            IntentClass::Informational => &self.informational,
            IntentClass::Transactional => &self.transactional,
        }
    }

    pub fn get_mut(&mut self, c: IntentClass) -> &mut T {
        match c {
            IntentClass::Navigational => &mut self.navigational,
            IntentClass::Informational => &mut self.informational,
            IntentClass::Transactional => &mut self.transactional,
        }
    }
}

/// Behavior parameters of one intent class. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorProfile {
    /// Mean of the queries-per-session count (1 + geometric).
    pub queries_mean: f64,
    /// Mean query length in terms (1 + Poisson).
    pub terms_mean: f64,
    /// Probability of carrying each previous-query term into the next query.
    pub reformulation_overlap: f64,
    /// Poisson mean of clicks per query, before the cap.
    pub clicks_mean: f64,
    pub max_clicks_per_query: u32,
    /// Probability that a click returns to an already clicked result.
    pub revisit_prob: f64,
    /// Probability that a click hits rank 1; other ranks are uniform in 2..=10.
    pub top_rank_prob: f64,
    /// Probability that a clicked URL is built from the query's terms.
    pub url_match_prob: f64,
    /// Probability that the pause before a follow-up query is a break.
    pub break_prob: f64,
    /// Mean break length beyond one minute.
    pub break_scale_sec: f64,
    pub dwell_scale_sec: f64,
    pub scroll_scale_px: f64,
    pub mouseover_scale: f64,
    pub move_scale_px: f64,
}

impl BehaviorProfile {
    fn validate(&self, class: IntentClass) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(format!("{class} profile: {m}")));
        for (name, p) in [
            ("reformulation_overlap", self.reformulation_overlap),
            ("revisit_prob", self.revisit_prob),
            ("top_rank_prob", self.top_rank_prob),
            ("url_match_prob", self.url_match_prob),
            ("break_prob", self.break_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        for (name, m) in [
            ("queries_mean", self.queries_mean),
            ("terms_mean", self.terms_mean),
            ("clicks_mean", self.clicks_mean),
            ("break_scale_sec", self.break_scale_sec),
            ("dwell_scale_sec", self.dwell_scale_sec),
            ("scroll_scale_px", self.scroll_scale_px),
            ("mouseover_scale", self.mouseover_scale),
            ("move_scale_px", self.move_scale_px),
        ] {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("{name} must be positive, got {m}"));
            }
        }
        if self.queries_mean < 1.0 || self.terms_mean < 1.0 {
            return bad("queries_mean and terms_mean must be at least 1".into());
        }
        Ok(())
    }
}

/// Navigational: one or two short queries, at most one top-ranked click per
/// query on a matching URL, no revisits or breaks. Informational: many
/// longer, reformulated queries, several clicks, revisits, breaks and long
/// dwell. Transactional: a few queries with several clicks on unrelated
/// sites and moderate dwell.
pub fn default_profiles() -> PerClass<BehaviorProfile> {
    PerClass {
        navigational: BehaviorProfile {
            queries_mean: 1.3,
            terms_mean: 1.5,
            reformulation_overlap: 0.6,
            clicks_mean: 1.5,
            max_clicks_per_query: 1,
            revisit_prob: 0.0,
            top_rank_prob: 0.9,
            url_match_prob: 0.95,
            break_prob: 0.0,
            break_scale_sec: 60.0,
            dwell_scale_sec: 8.0,
            scroll_scale_px: 200.0,
            mouseover_scale: 3.0,
            move_scale_px: 800.0,
        },
        informational: BehaviorProfile {
            queries_mean: 6.0,
            terms_mean: 4.5,
            reformulation_overlap: 0.5,
            clicks_mean: 2.5,
            max_clicks_per_query: 10,
            revisit_prob: 0.3,
            top_rank_prob: 0.3,
            url_match_prob: 0.6,
            break_prob: 0.35,
            break_scale_sec: 180.0,
            dwell_scale_sec: 75.0,
            scroll_scale_px: 2500.0,
            mouseover_scale: 25.0,
            move_scale_px: 6000.0,
        },
        transactional: BehaviorProfile {
            queries_mean: 2.0,
            terms_mean: 2.0,
            reformulation_overlap: 0.3,
            clicks_mean: 3.0,
            max_clicks_per_query: 10,
            revisit_prob: 0.05,
            top_rank_prob: 0.5,
            url_match_prob: 0.1,
            break_prob: 0.05,
            break_scale_sec: 90.0,
            dwell_scale_sec: 20.0,
            scroll_scale_px: 800.0,
            mouseover_scale: 10.0,
            move_scale_px: 2500.0,
        },
    }
}

/// Profiles that share every query and session parameter and differ only in
/// click, result and page-view behavior.
pub fn browsing_only_profiles() -> PerClass<BehaviorProfile> {
    let mut p = default_profiles();
    let shared = p.transactional;
    for c in IntentClass::ALL {
        let b = p.get_mut(c);
        b.queries_mean = shared.queries_mean;
        b.terms_mean = shared.terms_mean;
        b.reformulation_overlap = shared.reformulation_overlap;
        b.break_prob = shared.break_prob;
        b.break_scale_sec = shared.break_scale_sec;
    }
    p
}

/// Per-class distribution of test scores: `pre ~ U(pre_min, pre_max)`,
/// `post = clamp(pre + N(gain_mean, gain_sd), 0, 1)`, both rounded to 1e-3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeProfile {
    pub pre_min: f64,
    pub pre_max: f64,
    pub gain_mean: f64,
    pub gain_sd: f64,
}

pub fn default_knowledge() -> PerClass<KnowledgeProfile> {
    let flat = KnowledgeProfile { pre_min: 0.2, pre_max: 0.8, gain_mean: 0.02, gain_sd: 0.05 };
    PerClass {
        navigational: flat,
        informational: KnowledgeProfile { pre_min: 0.1, pre_max: 0.6, gain_mean: 0.3, gain_sd: 0.08 },
        transactional: KnowledgeProfile { gain_mean: 0.03, ..flat },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sessions: usize,
    pub n_users: usize,
    pub seed: u64,
    /// Class proportions; must sum to 1.
    pub mix: PerClass<f64>,
    pub profiles: PerClass<BehaviorProfile>,
    pub knowledge: PerClass<KnowledgeProfile>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let rest = (1.0 - DEFAULT_INFORMATIONAL_SHARE) / 2.0;
        Self {
            n_sessions: 913,
            n_users: 124,
            seed: 0,
            mix: PerClass { navigational: rest, informational: DEFAULT_INFORMATIONAL_SHARE, transactional: rest },
            profiles: default_profiles(),
            knowledge: default_knowledge(),
        }
    }
}

impl SynthConfig {
    pub fn from_toml(s: &str) -> Result<Self, SynthError> {
        let cfg: SynthConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_users == 0 {
            return bad("n_users must be at least 1".into());
        }
        let shares = IntentClass::ALL.map(|c| *self.mix.get(c));
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("class mix {shares:?} must be non-negative and sum to 1"));
        }
        for c in IntentClass::ALL {
            self.profiles.get(c).validate(c)?;
            let k = self.knowledge.get(c);
            if !(0.0 <= k.pre_min && k.pre_min <= k.pre_max && k.pre_max <= 1.0) {
                return bad(format!("{c} knowledge: need 0 <= pre_min <= pre_max <= 1"));
            }
            if !(k.gain_sd >= 0.0 && k.gain_sd.is_finite() && k.gain_mean.abs() <= 1.0) {
                return bad(format!("{c} knowledge: gain_sd must be >= 0 and |gain_mean| <= 1"));
            }
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` over `shares`; ties go to the lower index.
pub fn allocate(n: usize, shares: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle().take(short) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub log: String,
    pub labels: String,
    pub knowledge: String,
    pub class_counts: [usize; 3],
}

struct Generated {
    id: String,
    class: IntentClass,
    lines: String,
    record: KnowledgeRecord,
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let counts = allocate(cfg.n_sessions, &IntentClass::ALL.map(|c| *cfg.mix.get(c)));
    let mut classes: Vec<IntentClass> =
        IntentClass::ALL.iter().zip(&counts).flat_map(|(&c, &n)| std::iter::repeat_n(c, n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    classes.shuffle(&mut rng);

    let width = cfg.n_sessions.to_string().len().max(5);
    let sessions = par::map_range(cfg.n_sessions, |i| {
        let id = format!("s{:0width$}", i + 1);
        let user = format!("u{}", i % cfg.n_users);
        let class = classes[i];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let events = session_events(&mut rng, cfg.profiles.get(class), &user, &id, EPOCH_MS + i as u64 * DAY_MS);
        let record = knowledge_record(&mut rng, cfg.knowledge.get(class), &id);
        let mut lines = String::new();
        for e in &events {
            lines.push_str(&event_to_line(e));
            lines.push('\n');
        }
        Generated { id, class, lines, record }
    });

    let mut log = format!("{LOG_HEADER}\n");
    sessions.iter().for_each(|s| log.push_str(&s.lines));
    let mut labels = Vec::new();
    write_labels(sessions.iter().map(|s| (s.id.as_str(), s.class)), &mut labels)?;
    let mut knowledge = Vec::new();
    let records: Vec<KnowledgeRecord> = sessions.into_iter().map(|s| s.record).collect();
    write_knowledge(&records, &mut knowledge)?;
    debug_assert!(labels.starts_with(LABELS_HEADER.as_bytes()));
    Ok(SynthCorpus {
        log,
        labels: String::from_utf8(labels).expect("labels are UTF-8"),
        knowledge: String::from_utf8(knowledge).expect("knowledge file is UTF-8"),
        class_counts: [counts[0], counts[1], counts[2]],
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn knowledge_record(rng: &mut ChaCha8Rng, k: &KnowledgeProfile, id: &str) -> KnowledgeRecord {
    let pre = if k.pre_max > k.pre_min { rng.random_range(k.pre_min..=k.pre_max) } else { k.pre_min };
    let gain = if k.gain_sd > 0.0 {
        Normal::new(k.gain_mean, k.gain_sd).expect("validated sd").sample(rng)
    } else {
        k.gain_mean
    };
    let pre = round3(pre);
    let post = round3((pre + gain).clamp(0.0, 1.0));
    KnowledgeRecord::new(id, pre, post).expect("scores clamped to [0, 1]")
}

fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("positive mean").sample(rng)
}

fn exp_ms(rng: &mut ChaCha8Rng, mean_sec: f64) -> u64 {
    (exponential(rng, mean_sec) * 1000.0).round() as u64
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    }
}

fn word(rng: &mut ChaCha8Rng) -> String {
    format!("w{}", rng.random_range(0..VOCABULARY))
}

fn next_query(rng: &mut ChaCha8Rng, p: &BehaviorProfile, prev: &[String], topic: &[String]) -> Vec<String> {
    let len = 1 + poisson(rng, p.terms_mean - 1.0) as usize;
    let mut terms: Vec<String> = Vec::with_capacity(len);
    for t in prev {
        if terms.len() < len && rng.random_bool(p.reformulation_overlap) {
            terms.push(t.clone());
        }
    }
    while terms.len() < len {
        let fresh: Vec<&String> = topic.iter().filter(|t| !terms.contains(t) && !prev.contains(t)).collect();
        let t = match fresh.choose(rng) {
            Some(t) => (*t).clone(),
            None => word(rng),
        };
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    terms
}

fn session_events(rng: &mut ChaCha8Rng, p: &BehaviorProfile, user: &str, sid: &str, start: u64) -> Vec<Event> {
    let mut events = Vec::new();
    let mut emit = |t: u64, payload: EventPayload| events.push(Event::new(user, t, payload).with_session(sid));
    let topic: Vec<String> = (0..TOPIC_TERMS).map(|_| word(rng)).collect();
    let n_queries = 1 + Geometric::new(1.0 / p.queries_mean).expect("queries_mean >= 1").sample(rng) as usize;
    let mut clicked: Vec<(u32, String)> = Vec::new();
    let mut prev: Vec<String> = Vec::new();
    let mut t = start;
    for qi in 0..n_queries {
        if qi > 0 {
            t += if rng.random_bool(p.break_prob) {
                60_001 + exp_ms(rng, p.break_scale_sec)
            } else {
                rng.random_range(3_000..30_000)
            };
        }
        let terms = next_query(rng, p, &prev, &topic);
        emit(t, EventPayload::Query(crate::model::Query::new(terms.join(" "))));
        let n_clicks = poisson(rng, p.clicks_mean).min(u64::from(p.max_clicks_per_query));
        for _ in 0..n_clicks {
            t += rng.random_range(1_000..8_000);
            let (rank, url) = if !clicked.is_empty() && rng.random_bool(p.revisit_prob) {
                clicked.choose(rng).expect("non-empty").clone()
            } else {
                let rank = if rng.random_bool(p.top_rank_prob) { 1 } else { rng.random_range(2..=10) };
                let url = if rng.random_bool(p.url_match_prob) {
                    let a = terms.choose(rng).expect("queries have terms");
                    let b = terms.choose(rng).expect("queries have terms");
                    format!("https://www.{a}-{b}.com/{}", word(rng))
                } else {
                    format!("https://www.site{}.com/p{}", rng.random_range(0..SITES), rng.random_range(10..100))
                };
                clicked.push((rank, url.clone()));
                (rank, url)
            };
            emit(t, EventPayload::Click(Click { rank, url: url.clone(), query_index: Some(qi) }));
            t += rng.random_range(200..1_500);
            let dwell_ms = exp_ms(rng, p.dwell_scale_sec).max(500);
            let scroll_px = exponential(rng, p.scroll_scale_px).round() as u64;
            let mouseover_count = poisson(rng, p.mouseover_scale);
            emit(t, EventPayload::PageView(PageView { url, dwell_ms, scroll_px, mouseover_count }));
            t += dwell_ms;
            let move_px = exponential(rng, p.move_scale_px).round() as u64;
            emit(t, EventPayload::Mouse(MouseActivity { scroll_px, mouseover_count, move_px }));
        }
        prev = terms;
    }
    events
}
