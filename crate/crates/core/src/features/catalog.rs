//! The two versioned feature catalogs.
//!
//! Order is part of the format: vectors, CSV columns and model artifacts all
//! index features by catalog position. `docs/catalog/*.tsv` is generated from
//! these tables (see [`FeatureCatalog::to_tsv`]) and checked in tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Query,
    Session,
    Serp,
    Browsing,
    Mouse,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Query => "query",
            Category::Session => "session",
            Category::Serp => "serp",
            Category::Browsing => "browsing",
            Category::Mouse => "mouse",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Category::Query, Category::Session, Category::Serp, Category::Browsing, Category::Mouse]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown feature category {s:?}"))
    }
}

/// Value domain of a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Non-negative integer count.
    Count,
    /// Ratio bounded to [0, 1].
    Fraction,
    /// Non-negative, unbounded real (means, durations, per-query rates, variances).
    Real,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Count => "count",
            Kind::Fraction => "fraction",
            Kind::Real => "real",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDef {
    pub name: &'static str,
    pub category: Category,
    pub kind: Kind,
    pub definition: &'static str,
}

const fn f(name: &'static str, category: Category, kind: Kind, definition: &'static str) -> FeatureDef {
    FeatureDef { name, category, kind, definition }
}

use Category::{Browsing as B, Mouse as M, Query as Q, Serp as S, Session as SE};
use Kind::{Count as C, Fraction as F, Real as R};

pub(crate) const INTENT_V1: [FeatureDef; 22] = [
    f("query_terms_mean", Q, R, "mean query length in terms"),
    f("query_terms_max", Q, C, "max query length in terms"),
    f("query_terms_min", Q, C, "min query length in terms"),
    f("query_chars_mean", Q, R, "mean query length in characters"),
    f("query_jaccard_consec_mean", Q, F, "mean term Jaccard between consecutive queries"),
    f("query_jaccard_consec_max", Q, F, "max term Jaccard between consecutive queries"),
    f("query_shared_term_pair_frac", Q, F, "fraction of consecutive query pairs sharing a term"),
    f("session_queries", SE, C, "number of queries"),
    f("session_duration_sec", SE, R, "last minus first event timestamp, seconds"),
    f("session_interquery_mean_sec", SE, R, "mean interval between consecutive queries, seconds"),
    f("session_interquery_max_sec", SE, R, "max interval between consecutive queries, seconds"),
    f("session_breaks", SE, C, "inter-event gaps longer than the break threshold"),
    f("session_break_mean_sec", SE, R, "mean break length, seconds"),
    f("session_break_frac", SE, F, "fraction of session duration spent in breaks"),
    f("browse_clicks", B, C, "number of SERP clicks"),
    f("browse_clicks_per_query", B, R, "clicks divided by queries"),
    f("browse_distinct_urls", B, C, "distinct clicked URLs"),
    f("browse_revisits", B, C, "clicks on an already-clicked URL"),
    f("browse_revisit_ratio", B, F, "revisits divided by clicks"),
    f("browse_query_url_sim_mean", B, F, "mean Jaccard between issuing query terms and clicked URL tokens"),
    f("browse_query_url_sim_max", B, F, "max Jaccard between issuing query terms and clicked URL tokens"),
    f("browse_zero_click_query_frac", B, F, "fraction of queries with no paired click"),
];

pub(crate) const KNOWLEDGE_V1: [FeatureDef; 79] = [
    // query (20)
    f("query_count", Q, C, "number of queries"),
    f("query_terms_mean", Q, R, "number of query terms, mean over queries"),
    f("query_terms_sum", Q, C, "number of query terms, sum over queries"),
    f("query_terms_max", Q, C, "number of query terms, max over queries"),
    f("query_terms_min", Q, C, "number of query terms, min over queries"),
    f("query_terms_var", Q, R, "number of query terms, population variance"),
    f("query_complexity_mean", Q, R, "query complexity (characters per term), mean"),
    f("query_complexity_max", Q, R, "query complexity (characters per term), max"),
    f("query_complexity_min", Q, R, "query complexity (characters per term), min"),
    f("query_complexity_var", Q, R, "query complexity (characters per term), variance"),
    f("query_chars_mean", Q, R, "query length in characters, mean"),
    f("query_chars_sum", Q, C, "query length in characters, sum"),
    f("query_chars_max", Q, C, "query length in characters, max"),
    f("query_chars_min", Q, C, "query length in characters, min"),
    f("query_chars_var", Q, R, "query length in characters, variance"),
    f("query_unique_terms", Q, C, "distinct terms across the session"),
    f("query_unique_term_ratio", Q, F, "distinct terms divided by total terms"),
    f("query_new_terms_mean", Q, R, "terms unseen in earlier queries, mean over queries after the first"),
    f("query_jaccard_consec_mean", Q, F, "mean term Jaccard between consecutive queries"),
    f("query_interval_mean_sec", Q, R, "mean interval between consecutive queries, seconds"),
    // serp (18)
    f("serp_clicks", S, C, "number of clicks"),
    f("serp_click_through_ratio", S, R, "clicks divided by queries"),
    f("serp_clicks_per_query_max", S, C, "paired clicks per query, max"),
    f("serp_clicks_per_query_min", S, C, "paired clicks per query, min"),
    f("serp_clicks_per_query_var", S, R, "paired clicks per query, variance"),
    f("serp_zero_click_queries", S, C, "queries with no paired click"),
    f("serp_zero_click_frac", S, F, "fraction of queries with no paired click"),
    f("serp_rank_mean", S, R, "clicked SERP rank, mean over clicks with known rank"),
    f("serp_rank_max", S, C, "clicked SERP rank, max"),
    f("serp_rank_min", S, C, "clicked SERP rank, min"),
    f("serp_rank_var", S, R, "clicked SERP rank, variance"),
    f("serp_rank1_click_frac", S, F, "fraction of ranked clicks at rank 1"),
    f("serp_top3_click_frac", S, F, "fraction of ranked clicks within the top 3"),
    f("serp_distinct_urls", S, C, "distinct clicked URLs"),
    f("serp_revisits", S, C, "clicks on an already-clicked URL"),
    f("serp_revisit_ratio", S, F, "revisits divided by clicks"),
    f("serp_time_to_click_mean_sec", S, R, "query to first paired click, mean over clicked queries, seconds"),
    f("serp_time_to_click_max_sec", S, R, "query to first paired click, max, seconds"),
    // browsing (21)
    f("browse_pages_viewed", B, C, "number of pages viewed"),
    f("browse_distinct_pages", B, C, "distinct viewed URLs"),
    f("browse_page_revisits", B, C, "views of an already-viewed URL"),
    f("browse_pages_per_query", B, R, "page views divided by queries"),
    f("browse_dwell_mean_sec", B, R, "average time stay per page, seconds"),
    f("browse_dwell_sum_sec", B, R, "total dwell time, seconds"),
    f("browse_dwell_max_sec", B, R, "dwell per page, max, seconds"),
    f("browse_dwell_min_sec", B, R, "dwell per page, min, seconds"),
    f("browse_dwell_var", B, R, "dwell per page, variance, seconds squared"),
    f("browse_scroll_mean", B, R, "in-page scroll distance per view, mean, px"),
    f("browse_scroll_sum", B, C, "in-page scroll distance, sum, px"),
    f("browse_scroll_max", B, C, "in-page scroll distance per view, max, px"),
    f("browse_scroll_min", B, C, "in-page scroll distance per view, min, px"),
    f("browse_scroll_var", B, R, "in-page scroll distance per view, variance"),
    f("browse_mouseover_mean", B, R, "in-page mouseovers per view, mean"),
    f("browse_mouseover_sum", B, C, "in-page mouseovers, sum"),
    f("browse_mouseover_max", B, C, "in-page mouseovers per view, max"),
    f("browse_mouseover_min", B, C, "in-page mouseovers per view, min"),
    f("browse_mouseover_var", B, R, "in-page mouseovers per view, variance"),
    f("browse_long_dwell_frac", B, F, "fraction of views with dwell of at least 30 s"),
    f("browse_short_dwell_frac", B, F, "fraction of views with dwell under 5 s"),
    // mouse (20)
    f("mouse_events", M, C, "number of mouse-activity records"),
    f("mouse_scroll_total", M, C, "total scroll distance, px"),
    f("mouse_scroll_mean", M, R, "scroll distance per record, mean"),
    f("mouse_scroll_max", M, C, "scroll distance per record, max"),
    f("mouse_scroll_min", M, C, "scroll distance per record, min"),
    f("mouse_scroll_var", M, R, "scroll distance per record, variance"),
    f("mouse_mouseovers_total", M, C, "number of mouseovers"),
    f("mouse_mouseovers_mean", M, R, "mouseovers per record, mean"),
    f("mouse_mouseovers_max", M, C, "mouseovers per record, max"),
    f("mouse_mouseovers_min", M, C, "mouseovers per record, min"),
    f("mouse_mouseovers_var", M, R, "mouseovers per record, variance"),
    f("mouse_move_total", M, C, "total pointer movement, px"),
    f("mouse_move_mean", M, R, "pointer movement per record, mean"),
    f("mouse_move_max", M, C, "pointer movement per record, max"),
    f("mouse_move_min", M, C, "pointer movement per record, min"),
    f("mouse_move_var", M, R, "pointer movement per record, variance"),
    f("mouse_scroll_per_query", M, R, "total scroll distance divided by queries"),
    f("mouse_mouseovers_per_query", M, R, "mouseovers divided by queries"),
    f("mouse_move_per_query", M, R, "pointer movement divided by queries"),
    f("mouse_move_per_sec", M, R, "pointer movement divided by session duration in seconds"),
];

/// Identifies one of the built-in catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogId {
    #[serde(rename = "intent-v1")]
    IntentV1,
    #[serde(rename = "knowledge-v1")]
    KnowledgeV1,
}

impl CatalogId {
    pub fn name(self) -> &'static str {
        match self {
            CatalogId::IntentV1 => "intent-v1",
            CatalogId::KnowledgeV1 => "knowledge-v1",
        }
    }

    pub fn catalog(self) -> FeatureCatalog {
        match self {
            CatalogId::IntentV1 => FeatureCatalog::intent_v1(),
            CatalogId::KnowledgeV1 => FeatureCatalog::knowledge_v1(),
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intent-v1" => Ok(CatalogId::IntentV1),
            "knowledge-v1" => Ok(CatalogId::KnowledgeV1),
            other => Err(format!("unknown catalog {other:?} (expected intent-v1 or knowledge-v1)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureCatalog {
    pub id: CatalogId,
    pub entries: &'static [FeatureDef],
}

impl FeatureCatalog {
    pub fn intent_v1() -> Self {
        Self { id: CatalogId::IntentV1, entries: &INTENT_V1 }
    }

    pub fn knowledge_v1() -> Self {
        Self { id: CatalogId::KnowledgeV1, entries: &KNOWLEDGE_V1 }
    }

    pub fn name(&self) -> &'static str {
        self.id.name()
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|e| e.name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn count_by_category(&self, c: Category) -> usize {
        self.entries.iter().filter(|e| e.category == c).count()
    }

    /// The checked-in catalog document: a versioned TSV of position, name,
    /// category, kind and definition.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#session-miner-catalog v1 {}\nindex\tname\tcategory\tkind\tdefinition\n", self.name());
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{i}\t{}\t{}\t{}\t{}\n", e.name, e.category, e.kind.name(), e.definition));
        }
        out
    }
}
