//! Session feature vectors over the `intent-v1` (22) and `knowledge-v1` (79)
//! catalogs, plus the feature-matrix CSV format.
//!
//! Degenerate statistics (no clicks, a single query, zero duration) are 0,
//! never NaN. Clicks pair with their issuing query through the logged query
//! index when present, otherwise with the latest query issued no later than the
//! click.

mod catalog;
mod extract;
pub mod matrix;
mod similarity;
mod stats;

pub use catalog::{CatalogId, Category, FeatureCatalog, FeatureDef, Kind};
pub use matrix::{read_matrix, write_matrix, FeatureMatrix, MatrixRow, FEATURES_HEADER};
pub use similarity::{jaccard, url_tokens};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{check_session, Session, ValidationError};
use crate::par;

pub const DEFAULT_BREAK_MS: u64 = 60_000;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("feature matrix: {0}")]
    Matrix(String),
    #[error("feature matrix I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Inter-event inactivity that counts as a session break.
    pub break_ms: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { break_ms: DEFAULT_BREAK_MS }
    }
}

/// Finite values laid out in catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub catalog: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(catalog: impl Into<String>, values: Vec<f64>) -> Self {
        Self { catalog: catalog.into(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn extract_intent_vector(s: &Session) -> Result<FeatureVector, FeatureError> {
    extract_with(CatalogId::IntentV1, s, &ExtractOptions::default())
}

pub fn extract_knowledge_vector(s: &Session) -> Result<FeatureVector, FeatureError> {
    extract_with(CatalogId::KnowledgeV1, s, &ExtractOptions::default())
}

pub fn extract_with(catalog: CatalogId, s: &Session, opts: &ExtractOptions) -> Result<FeatureVector, FeatureError> {
    check_session(s)?;
    let values = match catalog {
        CatalogId::IntentV1 => extract::intent_values(s, opts.break_ms),
        CatalogId::KnowledgeV1 => extract::knowledge_values(s),
    };
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector::new(catalog.name(), values))
}

/// Extracts every session, in order, across the worker pool.
pub fn extract_all(
    catalog: CatalogId,
    sessions: &[Session],
    opts: &ExtractOptions,
) -> Result<Vec<FeatureVector>, FeatureError> {
    par::try_map_slice(sessions, |s| extract_with(catalog, s, opts))
}

/// Extracts every session into a matrix; labels come from `Session::label`.
pub fn build_matrix(
    catalog: CatalogId,
    sessions: &[Session],
    opts: &ExtractOptions,
) -> Result<FeatureMatrix, FeatureError> {
    let vectors = extract_all(catalog, sessions, opts)?;
    Ok(FeatureMatrix {
        catalog: catalog.name().to_string(),
        feature_names: catalog.catalog().names().map(String::from).collect(),
        has_labels: sessions.iter().any(|s| s.label.is_some()),
        rows: sessions
            .iter()
            .zip(vectors)
            .map(|(s, v)| MatrixRow {
                session_id: s.session_id.clone(),
                label: s.label.map(|l| l.name().to_string()),
                values: v.values,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Click, Event, EventPayload, MouseActivity, PageView};
    use proptest::prelude::*;

    fn idx(cat: &FeatureCatalog, name: &str) -> usize {
        cat.index_of(name).unwrap_or_else(|| panic!("{name}"))
    }

    fn click(t: u64, url: &str, qi: Option<usize>, rank: u32) -> Event {
        Event::new("u", t, EventPayload::Click(Click { rank, url: url.into(), query_index: qi }))
    }

    fn view(t: u64, url: &str, dwell_ms: u64) -> Event {
        Event::new(
            "u",
            t,
            EventPayload::PageView(PageView { url: url.into(), dwell_ms, scroll_px: 100, mouseover_count: 2 }),
        )
    }

    fn mouse(t: u64) -> Event {
        Event::new("u", t, EventPayload::Mouse(MouseActivity { scroll_px: 40, mouseover_count: 3, move_px: 500 }))
    }

    #[test]
    fn reformulated_queries_without_clicks() {
        let s = Session::new(
            "s",
            "u",
            vec![Event::query("u", 0, "paris weather"), Event::query("u", 10_000, "paris weather forecast")],
        );
        let v = extract_intent_vector(&s).unwrap();
        let cat = FeatureCatalog::intent_v1();
        assert_eq!(v.values[idx(&cat, "query_terms_mean")], 2.5);
        assert_eq!(v.values[idx(&cat, "query_jaccard_consec_mean")], 2.0 / 3.0);
        assert_eq!(v.values[idx(&cat, "query_jaccard_consec_max")], 2.0 / 3.0);
        assert_eq!(v.values[idx(&cat, "query_shared_term_pair_frac")], 1.0);
        assert_eq!(v.values[idx(&cat, "browse_clicks")], 0.0);
        assert_eq!(v.values[idx(&cat, "browse_zero_click_query_frac")], 1.0);
        assert_eq!(v.values[idx(&cat, "session_interquery_mean_sec")], 10.0);
        assert_eq!(v.values[idx(&cat, "query_chars_mean")], (13.0 + 22.0) / 2.0);
    }

    #[test]
    fn single_event_session() {
        let s = Session::new("s", "u", vec![Event::query("u", 42, "hello")]);
        let v = extract_intent_vector(&s).unwrap();
        let cat = FeatureCatalog::intent_v1();
        assert_eq!(v.len(), 22);
        assert_eq!(v.values[idx(&cat, "session_duration_sec")], 0.0);
        assert_eq!(v.values[idx(&cat, "session_breaks")], 0.0);
        for name in ["query_jaccard_consec_mean", "query_jaccard_consec_max", "query_shared_term_pair_frac"] {
            assert_eq!(v.values[idx(&cat, name)], 0.0, "{name}");
        }
        assert_eq!(extract_knowledge_vector(&s).unwrap().len(), 79);
    }

    #[test]
    fn breaks_and_clicks() {
        let s = Session::new(
            "s",
            "u",
            vec![
                Event::query("u", 0, "rust tutorial"),
                click(5_000, "https://www.rust-lang.org/learn", None, 1),
                Event::query("u", 125_000, "rust book"),
                click(130_000, "https://doc.rust-lang.org/book", Some(1), 2),
                click(140_000, "https://www.rust-lang.org/learn", Some(0), 0),
            ],
        );
        let v = extract_intent_vector(&s).unwrap();
        let cat = FeatureCatalog::intent_v1();
        let get = |n| v.values[idx(&cat, n)];
        // gaps: 5, 120, 5, 10 seconds; one break of 120 s
        assert_eq!(get("session_breaks"), 1.0);
        assert_eq!(get("session_break_mean_sec"), 120.0);
        assert_eq!(get("session_break_frac"), 120.0 / 140.0);
        assert_eq!(get("browse_clicks"), 3.0);
        assert_eq!(get("browse_distinct_urls"), 2.0);
        assert_eq!(get("browse_revisits"), 1.0);
        assert_eq!(get("browse_revisit_ratio"), 1.0 / 3.0);
        assert_eq!(get("browse_zero_click_query_frac"), 0.0);
        // {rust,tutorial} vs {rust,lang,org,learn} = 1/5; {rust,book} vs {doc,rust,lang,org,book} = 2/5
        let sims = [0.2, 0.4, 0.2];
        assert!((get("browse_query_url_sim_mean") - sims.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert_eq!(get("browse_query_url_sim_max"), 0.4);

        let k = extract_knowledge_vector(&s).unwrap();
        let kc = FeatureCatalog::knowledge_v1();
        let kget = |n| k.values[idx(&kc, n)];
        assert_eq!(kget("serp_rank_mean"), 1.5);
        assert_eq!(kget("serp_rank1_click_frac"), 0.5);
        assert_eq!(kget("serp_time_to_click_mean_sec"), 5.0);
        assert_eq!(kget("query_new_terms_mean"), 1.0);
        assert_eq!(kget("query_complexity_mean"), ((4.0 + 8.0) / 2.0 + (4.0 + 4.0) / 2.0) / 2.0);
    }

    #[test]
    fn four_clicks_over_two_queries() {
        let s = Session::new(
            "s",
            "u",
            vec![
                Event::query("u", 0, "a b"),
                click(1, "https://x.org/1", None, 1),
                click(2, "https://x.org/2", None, 2),
                Event::query("u", 3, "c"),
                click(4, "https://x.org/3", None, 3),
                click(5, "https://x.org/4", None, 4),
            ],
        );
        let k = extract_knowledge_vector(&s).unwrap();
        let kc = FeatureCatalog::knowledge_v1();
        assert_eq!(k.values[idx(&kc, "serp_clicks")], 4.0);
        assert_eq!(k.values[idx(&kc, "serp_click_through_ratio")], 2.0);
    }

    #[test]
    fn no_browsing_or_mouse_means_zero_block() {
        let s = Session::new("s", "u", vec![Event::query("u", 0, "a"), click(10, "https://y.com", None, 1)]);
        let k = extract_knowledge_vector(&s).unwrap();
        let kc = FeatureCatalog::knowledge_v1();
        let zeros: Vec<f64> = kc
            .entries
            .iter()
            .zip(&k.values)
            .filter(|(e, _)| matches!(e.category, Category::Browsing | Category::Mouse))
            .map(|(_, &v)| v)
            .collect();
        assert_eq!(zeros.len(), 41);
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn browsing_and_mouse_blocks() {
        let s = Session::new(
            "s",
            "u",
            vec![
                Event::query("u", 0, "a"),
                view(1_000, "p1", 40_000),
                view(2_000, "p1", 2_000),
                mouse(3_000),
                mouse(4_000),
            ],
        );
        let k = extract_knowledge_vector(&s).unwrap();
        let kc = FeatureCatalog::knowledge_v1();
        let get = |n| k.values[idx(&kc, n)];
        assert_eq!(get("browse_pages_viewed"), 2.0);
        assert_eq!(get("browse_page_revisits"), 1.0);
        assert_eq!(get("browse_dwell_mean_sec"), 21.0);
        assert_eq!(get("browse_long_dwell_frac"), 0.5);
        assert_eq!(get("browse_short_dwell_frac"), 0.5);
        assert_eq!(get("mouse_scroll_total"), 80.0);
        assert_eq!(get("mouse_mouseovers_total"), 6.0);
        assert_eq!(get("mouse_move_per_sec"), 1000.0 / 4.0);
    }

    #[test]
    fn invalid_session_propagates() {
        let s = Session::new("bad", "u", vec![view(0, "p", 1)]);
        assert!(matches!(extract_intent_vector(&s), Err(FeatureError::Invalid(_))));
    }

    // Random sessions: queries at non-decreasing timestamps, clicks carrying
    // explicit query indices, views and mouse events sharing timestamps.
    fn arb_session() -> impl Strategy<Value = Session> {
        let ev = (0u8..4, 0u64..5, 0usize..6, 0u64..60_000, 0u32..5);
        (1usize..5, proptest::collection::vec(ev, 0..25)).prop_map(|(nq, evs)| {
            let mut events: Vec<Event> =
                (0..nq).map(|i| Event::query("u", i as u64 * 20_000, &format!("t{} t{} x", i % 3, i))).collect();
            for (k, slot, qi, dwell, rank) in evs {
                let t = slot * 20_000;
                let e = match k {
                    0 | 1 => click(t, &format!("https://s{qi}.com/t{}", qi % 3), Some(qi % nq), rank),
                    2 => view(t, &format!("p{qi}"), dwell),
                    _ => mouse(t),
                };
                events.push(e);
            }
            events.sort_by_key(|e| e.timestamp);
            Session::new("s", "u", events)
        })
    }

    proptest! {
        #[test]
        fn vector_contract(s in arb_session()) {
            for cat in [FeatureCatalog::intent_v1(), FeatureCatalog::knowledge_v1()] {
                let v = extract_with(cat.id, &s, &ExtractOptions::default()).unwrap();
                prop_assert_eq!(v.len(), cat.size());
                for (e, &x) in cat.entries.iter().zip(&v.values) {
                    prop_assert!(x.is_finite() && x >= 0.0, "{} = {}", e.name, x);
                    match e.kind {
                        Kind::Fraction => prop_assert!(x <= 1.0, "{} = {}", e.name, x),
                        Kind::Count => prop_assert_eq!(x.fract(), 0.0),
                        Kind::Real => {}
                    }
                }
            }
        }

        #[test]
        fn same_timestamp_permutation_invariant(s in arb_session(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = s.clone();
            // shuffle non-query events within each timestamp group; query order is kept
            let mut i = 0;
            while i < shuffled.events.len() {
                let t = shuffled.events[i].timestamp;
                let j = shuffled.events[i..].iter().position(|e| e.timestamp != t).map_or(shuffled.events.len(), |p| i + p);
                let group = &mut shuffled.events[i..j];
                let query_slots: Vec<usize> = (0..group.len()).filter(|&k| group[k].kind() == crate::model::EventKind::Query).collect();
                let mut others: Vec<Event> = group.iter().filter(|e| e.kind() != crate::model::EventKind::Query).cloned().collect();
                let queries: Vec<Event> = group.iter().filter(|e| e.kind() == crate::model::EventKind::Query).cloned().collect();
                others.shuffle(&mut rng);
                // put queries at random positions but in their original relative order
                let mut slots: Vec<usize> = (0..group.len()).collect();
                slots.shuffle(&mut rng);
                let mut qslots: Vec<usize> = slots[..query_slots.len()].to_vec();
                qslots.sort_unstable();
                let mut qi = queries.into_iter();
                let mut oi = others.into_iter();
                for (k, slot) in group.iter_mut().enumerate() {
                    *slot = if qslots.contains(&k) { qi.next().unwrap() } else { oi.next().unwrap() };
                }
                i = j;
            }
            for cat in [CatalogId::IntentV1, CatalogId::KnowledgeV1] {
                let a = extract_with(cat, &s, &ExtractOptions::default()).unwrap();
                let b = extract_with(cat, &shuffled, &ExtractOptions::default()).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{} vs {}", x, y);
                }
            }
        }

        #[test]
        fn shared_signals_agree(s in arb_session()) {
            let i = extract_intent_vector(&s).unwrap();
            let k = extract_knowledge_vector(&s).unwrap();
            let ic = FeatureCatalog::intent_v1();
            let kc = FeatureCatalog::knowledge_v1();
            for (a, b) in [
                ("browse_clicks", "serp_clicks"),
                ("browse_clicks_per_query", "serp_click_through_ratio"),
                ("browse_distinct_urls", "serp_distinct_urls"),
                ("browse_revisits", "serp_revisits"),
                ("session_queries", "query_count"),
                ("query_terms_mean", "query_terms_mean"),
                ("query_jaccard_consec_mean", "query_jaccard_consec_mean"),
                ("session_interquery_mean_sec", "query_interval_mean_sec"),
            ] {
                prop_assert_eq!(i.values[idx(&ic, a)], k.values[idx(&kc, b)], "{} / {}", a, b);
            }
        }
    }
}
