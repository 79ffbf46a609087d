//! Event/session data model and the three-way intent taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowercase, split on Unicode whitespace, drop empty tokens.
pub fn tokenize_query(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).filter(|t| !t.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    text: String,
    terms: Vec<String>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let terms = tokenize_query(&text);
        Self { text, terms }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Click {
    /// 1-based SERP rank, 0 when unknown.
    pub rank: u32,
    pub url: String,
    /// Index of the issuing query within the session, when the log records it.
    pub query_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageView {
    pub url: String,
    pub dwell_ms: u64,
    pub scroll_px: u64,
    pub mouseover_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MouseActivity {
    pub scroll_px: u64,
    pub mouseover_count: u64,
    pub move_px: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventPayload {
    Query(Query),
    Click(Click),
    PageView(PageView),
    Mouse(MouseActivity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Query,
    Click,
    PageView,
    Mouse,
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::Query(_) => EventKind::Query,
            EventPayload::Click(_) => EventKind::Click,
            EventPayload::PageView(_) => EventKind::PageView,
            EventPayload::Mouse(_) => EventKind::Mouse,
        }
    }
}

/// One timestamped searcher action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user_id: String,
    /// Milliseconds since the Unix epoch (UTC).
    pub timestamp: u64,
    pub session_id: Option<String>,
    pub payload: EventPayload,
}

impl Event {
    pub fn new(user_id: impl Into<String>, timestamp: u64, payload: EventPayload) -> Self {
        Self { user_id: user_id.into(), timestamp, session_id: None, payload }
    }

    pub fn with_session(mut self, session_id: impl Into<String>) -> Self {
        self.session_id = Some(session_id.into());
        self
    }

    pub fn query(user_id: impl Into<String>, timestamp: u64, text: &str) -> Self {
        Self::new(user_id, timestamp, EventPayload::Query(Query::new(text)))
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

/// Broder's intent taxonomy. The ordinal encoding is 0/1/2 in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentClass {
    Navigational,
    Informational,
    Transactional,
}

impl IntentClass {
    pub const ALL: [IntentClass; 3] =
        [IntentClass::Navigational, IntentClass::Informational, IntentClass::Transactional];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            IntentClass::Navigational => "navigational",
            IntentClass::Informational => "informational",
            IntentClass::Transactional => "transactional",
        }
    }
}

impl fmt::Display for IntentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown intent label {0:?}")]
pub struct UnknownIntent(pub String);

impl FromStr for IntentClass {
    type Err = UnknownIntent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|c| c.name() == lower).ok_or_else(|| UnknownIntent(s.to_string()))
    }
}

/// A user's search activity for one information need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub events: Vec<Event>,
    pub label: Option<IntentClass>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, user_id: impl Into<String>, events: Vec<Event>) -> Self {
        Self { session_id: session_id.into(), user_id: user_id.into(), events, label: None }
    }

    pub fn with_label(mut self, label: IntentClass) -> Self {
        self.label = Some(label);
        self
    }

    /// Queries in session order, paired with their timestamps.
    pub fn queries(&self) -> impl Iterator<Item = (u64, &Query)> {
        self.events.iter().filter_map(|e| match &e.payload {
            EventPayload::Query(q) => Some((e.timestamp, q)),
            _ => None,
        })
    }

    pub fn start_ms(&self) -> u64 {
        self.events.first().map_or(0, |e| e.timestamp)
    }

    pub fn end_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("session {session_id}: no events")]
    EmptySession { session_id: String },
    #[error("session {session_id}: timestamp decreases at event {index}")]
    UnorderedTimestamps { session_id: String, index: usize },
    #[error("session {session_id}: contains no query event")]
    NoQueryEvent { session_id: String },
}

/// Checks the session invariants and hands the session back unchanged.
pub fn validate_session(s: Session) -> Result<Session, ValidationError> {
    check_session(&s)?;
    Ok(s)
}

pub(crate) fn check_session(s: &Session) -> Result<(), ValidationError> {
    if s.events.is_empty() {
        return Err(ValidationError::EmptySession { session_id: s.session_id.clone() });
    }
    if let Some(i) = s.events.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(ValidationError::UnorderedTimestamps { session_id: s.session_id.clone(), index: i + 1 });
    }
    if !s.events.iter().any(|e| e.kind() == EventKind::Query) {
        return Err(ValidationError::NoQueryEvent { session_id: s.session_id.clone() });
    }
    Ok(())
}
