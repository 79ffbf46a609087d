//! Feature computation over a validated session.

use std::collections::{BTreeSet, HashSet};

use super::similarity::{jaccard, url_tokens};
use super::stats::{ratio, Summary};
use crate::model::{EventPayload, MouseActivity, PageView, Session};

const LONG_DWELL_MS: u64 = 30_000;
const SHORT_DWELL_MS: u64 = 5_000;

struct QueryInfo<'a> {
    ts: u64,
    text: &'a str,
    terms: &'a [String],
    set: BTreeSet<&'a str>,
}

impl QueryInfo<'_> {
    fn complexity(&self) -> f64 {
        let chars: usize = self.terms.iter().map(|t| t.chars().count()).sum();
        ratio(chars as f64, self.terms.len() as f64)
    }
}

struct ClickInfo<'a> {
    ts: u64,
    rank: u32,
    url: &'a str,
    query: Option<usize>,
}

/// Pre-digested view of a session shared by both extractors.
pub(crate) struct SessionView<'a> {
    queries: Vec<QueryInfo<'a>>,
    clicks: Vec<ClickInfo<'a>>,
    views: Vec<&'a PageView>,
    mouse: Vec<&'a MouseActivity>,
    timestamps: Vec<u64>,
}

impl<'a> SessionView<'a> {
    pub fn new(s: &'a Session) -> Self {
        let queries: Vec<QueryInfo> = s
            .queries()
            .map(|(ts, q)| QueryInfo {
                ts,
                text: q.text(),
                terms: q.terms(),
                set: q.terms().iter().map(String::as_str).collect(),
            })
            .collect();
        let mut clicks = Vec::new();
        let mut views = Vec::new();
        let mut mouse = Vec::new();
        for e in &s.events {
            match &e.payload {
                EventPayload::Click(c) => {
                    let query = c
                        .query_index
                        .filter(|&qi| qi < queries.len())
                        // latest query (in session order) issued no later than the click
                        .or_else(|| queries.iter().rposition(|q| q.ts <= e.timestamp));
                    clicks.push(ClickInfo { ts: e.timestamp, rank: c.rank, url: &c.url, query });
                }
                EventPayload::PageView(v) => views.push(v),
                EventPayload::Mouse(m) => mouse.push(m),
                EventPayload::Query(_) => {}
            }
        }
        let timestamps = s.events.iter().map(|e| e.timestamp).collect();
        Self { queries, clicks, views, mouse, timestamps }
    }

    fn n_queries(&self) -> f64 {
        self.queries.len() as f64
    }

    fn duration_sec(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => (b - a) as f64 / 1000.0,
            _ => 0.0,
        }
    }

    fn consecutive_jaccard(&self) -> Vec<f64> {
        self.queries.windows(2).map(|w| jaccard(&w[0].set, &w[1].set)).collect()
    }

    fn interquery_sec(&self) -> Vec<f64> {
        self.queries.windows(2).map(|w| (w[1].ts - w[0].ts) as f64 / 1000.0).collect()
    }

    fn clicks_per_query(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.queries.len()];
        for c in &self.clicks {
            if let Some(q) = c.query {
                counts[q] += 1.0;
            }
        }
        counts
    }

    fn distinct_click_urls(&self) -> usize {
        self.clicks.iter().map(|c| c.url).collect::<HashSet<_>>().len()
    }

    fn query_url_similarity(&self) -> Vec<f64> {
        self.clicks
            .iter()
            .filter_map(|c| {
                let q = &self.queries[c.query?];
                let terms: BTreeSet<String> = q.terms.iter().cloned().collect();
                Some(jaccard(&terms, &url_tokens(c.url)))
            })
            .collect()
    }
}

/// 22 values in `intent-v1` order.
pub(crate) fn intent_values(s: &Session, break_ms: u64) -> Vec<f64> {
    let v = SessionView::new(s);
    let nq = v.n_queries();

    let terms: Vec<f64> = v.queries.iter().map(|q| q.terms.len() as f64).collect();
    let chars: Vec<f64> = v.queries.iter().map(|q| q.text.chars().count() as f64).collect();
    let jac = v.consecutive_jaccard();
    let shared = v.queries.windows(2).filter(|w| !w[0].set.is_disjoint(&w[1].set)).count();
    let t = Summary::of(&terms);
    let j = Summary::of(&jac);

    let iq = Summary::of(&v.interquery_sec());
    let duration = v.duration_sec();
    let breaks: Vec<f64> = v
        .timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&gap| gap > break_ms)
        .map(|gap| gap as f64 / 1000.0)
        .collect();
    let br = Summary::of(&breaks);

    let clicks = v.clicks.len() as f64;
    let distinct = v.distinct_click_urls() as f64;
    let revisits = clicks - distinct;
    let sim = Summary::of(&v.query_url_similarity());
    let zero_click = v.clicks_per_query().iter().filter(|&&c| c == 0.0).count() as f64;

    vec![
        t.mean,
        t.max,
        t.min,
        Summary::of(&chars).mean,
        j.mean,
        j.max,
        ratio(shared as f64, jac.len() as f64),
        nq,
        duration,
        iq.mean,
        iq.max,
        breaks.len() as f64,
        br.mean,
        ratio(br.sum, duration).min(1.0),
        clicks,
        ratio(clicks, nq),
        distinct,
        revisits,
        ratio(revisits, clicks),
        sim.mean,
        sim.max,
        ratio(zero_click, nq),
    ]
}

/// 79 values in `knowledge-v1` order.
pub(crate) fn knowledge_values(s: &Session) -> Vec<f64> {
    let v = SessionView::new(s);
    let nq = v.n_queries();
    let duration = v.duration_sec();
    let mut out = Vec::with_capacity(79);
    let push5 = |out: &mut Vec<f64>, s: Summary| out.extend([s.mean, s.sum, s.max, s.min, s.var]);

    // query
    let terms = Summary::of(&v.queries.iter().map(|q| q.terms.len() as f64).collect::<Vec<_>>());
    let complexity = Summary::of(&v.queries.iter().map(QueryInfo::complexity).collect::<Vec<_>>());
    let chars = Summary::of(&v.queries.iter().map(|q| q.text.chars().count() as f64).collect::<Vec<_>>());
    let unique: BTreeSet<&str> = v.queries.iter().flat_map(|q| q.set.iter().copied()).collect();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut new_terms = Vec::new();
    for (i, q) in v.queries.iter().enumerate() {
        if i > 0 {
            new_terms.push(q.set.difference(&seen).count() as f64);
        }
        seen.extend(q.set.iter().copied());
    }
    out.extend([nq, terms.mean, terms.sum, terms.max, terms.min, terms.var]);
    out.extend([complexity.mean, complexity.max, complexity.min, complexity.var]);
    push5(&mut out, chars);
    out.extend([
        unique.len() as f64,
        ratio(unique.len() as f64, terms.sum),
        Summary::of(&new_terms).mean,
        Summary::of(&v.consecutive_jaccard()).mean,
        Summary::of(&v.interquery_sec()).mean,
    ]);

    // serp
    let clicks = v.clicks.len() as f64;
    let per_query = v.clicks_per_query();
    let cpq = Summary::of(&per_query);
    let zero = per_query.iter().filter(|&&c| c == 0.0).count() as f64;
    let ranks: Vec<f64> = v.clicks.iter().filter(|c| c.rank > 0).map(|c| c.rank as f64).collect();
    let rank = Summary::of(&ranks);
    let rank1 = ranks.iter().filter(|&&r| r == 1.0).count() as f64;
    let top3 = ranks.iter().filter(|&&r| r <= 3.0).count() as f64;
    let distinct = v.distinct_click_urls() as f64;
    let mut first_click: Vec<Option<u64>> = vec![None; v.queries.len()];
    for c in &v.clicks {
        if let Some(q) = c.query {
            let dt = c.ts.saturating_sub(v.queries[q].ts);
            first_click[q] = Some(first_click[q].map_or(dt, |d| d.min(dt)));
        }
    }
    let ttc = Summary::of(&first_click.iter().flatten().map(|&d| d as f64 / 1000.0).collect::<Vec<_>>());
    out.extend([
        clicks,
        ratio(clicks, nq),
        cpq.max,
        cpq.min,
        cpq.var,
        zero,
        ratio(zero, nq),
        rank.mean,
        rank.max,
        rank.min,
        rank.var,
        ratio(rank1, ranks.len() as f64),
        ratio(top3, ranks.len() as f64),
        distinct,
        clicks - distinct,
        ratio(clicks - distinct, clicks),
        ttc.mean,
        ttc.max,
    ]);

    // browsing
    let pages = v.views.len() as f64;
    let distinct_pages = v.views.iter().map(|p| p.url.as_str()).collect::<HashSet<_>>().len() as f64;
    let dwell = Summary::of(&v.views.iter().map(|p| p.dwell_ms as f64 / 1000.0).collect::<Vec<_>>());
    let scroll = Summary::of(&v.views.iter().map(|p| p.scroll_px as f64).collect::<Vec<_>>());
    let mo = Summary::of(&v.views.iter().map(|p| p.mouseover_count as f64).collect::<Vec<_>>());
    let long = v.views.iter().filter(|p| p.dwell_ms >= LONG_DWELL_MS).count() as f64;
    let short = v.views.iter().filter(|p| p.dwell_ms < SHORT_DWELL_MS).count() as f64;
    out.extend([pages, distinct_pages, pages - distinct_pages, ratio(pages, nq)]);
    push5(&mut out, dwell);
    push5(&mut out, scroll);
    push5(&mut out, mo);
    out.extend([ratio(long, pages), ratio(short, pages)]);

    // mouse
    let m_scroll = Summary::of(&v.mouse.iter().map(|m| m.scroll_px as f64).collect::<Vec<_>>());
    let m_over = Summary::of(&v.mouse.iter().map(|m| m.mouseover_count as f64).collect::<Vec<_>>());
    let m_move = Summary::of(&v.mouse.iter().map(|m| m.move_px as f64).collect::<Vec<_>>());
    out.push(v.mouse.len() as f64);
    for s in [m_scroll, m_over, m_move] {
        out.extend([s.sum, s.mean, s.max, s.min, s.var]);
    }
    out.extend([ratio(m_scroll.sum, nq), ratio(m_over.sum, nq), ratio(m_move.sum, nq), ratio(m_move.sum, duration)]);

    debug_assert_eq!(out.len(), 79);
    out
}
