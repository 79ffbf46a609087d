//! Event-log and label-file parsing, and corpus assembly.
//!
//! Event log: UTF-8 JSON lines after a `#session-miner-log v1` header. Each
//! record carries `u` (user), `t` (epoch ms), `k` (`q`/`c`/`v`/`m`), an optional
//! `sid`, and kind-specific fields:
//!
//! | kind | fields |
//! |------|--------|
//! | `q`  | `text` |
//! | `c`  | `rank`, `url`, optional `qi` |
//! | `v`  | `url`, `dwell`, `scroll`, `mo` |
//! | `m`  | `scroll`, `mo`, `move` |
//!
//! Malformed records are reported as [`Diagnostic`]s and skipped. The writer
//! emits fields in the order above with no whitespace, so parsing its output
//! and writing it again reproduces the input byte for byte.
//!
//! Label file: `#session-miner-labels v1` header, then `session_id<TAB>label`.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_session, Click, Event, EventPayload, IntentClass, MouseActivity, PageView, Query, Session, ValidationError,
};
use crate::par;
use crate::segment::{segment_by_gap, GapPolicy, SegmentError};

pub const LOG_HEADER: &str = "#session-miner-log v1";
pub const LABELS_HEADER: &str = "#session-miner-labels v1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    UnreadableStream(#[from] io::Error),
    #[error("missing or wrong format header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: &'static str, found: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: expected `session_id<TAB>label`")]
    MalformedLabelLine { line: usize },
    #[error("session {session_id}: conflicting labels {first} and {second}")]
    DuplicateConflict { session_id: String, first: IntentClass, second: IntentClass },
    #[error("event {index} has no session id (required by the by-field policy)")]
    MissingSessionId { index: usize },
    #[error("session {session_id}: events from more than one user")]
    MixedUsers { session_id: String },
    #[error("user {user_id}: {source}")]
    Segment { user_id: String, source: SegmentError },
    #[error("invalid session: {0}")]
    InvalidSession(#[from] ValidationError),
}

/// A skipped log line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based physical line number (the header is line 1).
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub events: Vec<Event>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    u: String,
    t: u64,
    k: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qi: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dwell: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scroll: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mo: Option<u64>,
    #[serde(default, rename = "move", skip_serializing_if = "Option::is_none")]
    move_px: Option<u64>,
}

impl Record {
    fn empty(e: &Event, k: &str) -> Self {
        Record {
            u: e.user_id.clone(),
            t: e.timestamp,
            k: k.to_string(),
            sid: e.session_id.clone(),
            text: None,
            rank: None,
            url: None,
            qi: None,
            dwell: None,
            scroll: None,
            mo: None,
            move_px: None,
        }
    }

    fn from_event(e: &Event) -> Self {
        match &e.payload {
            EventPayload::Query(q) => Record { text: Some(q.text().to_string()), ..Record::empty(e, "q") },
            EventPayload::Click(c) => {
                Record { rank: Some(c.rank), url: Some(c.url.clone()), qi: c.query_index, ..Record::empty(e, "c") }
            }
            EventPayload::PageView(v) => Record {
                url: Some(v.url.clone()),
                dwell: Some(v.dwell_ms),
                scroll: Some(v.scroll_px),
                mo: Some(v.mouseover_count),
                ..Record::empty(e, "v")
            },
            EventPayload::Mouse(m) => Record {
                scroll: Some(m.scroll_px),
                mo: Some(m.mouseover_count),
                move_px: Some(m.move_px),
                ..Record::empty(e, "m")
            },
        }
    }

    fn into_event(self) -> Result<Event, String> {
        fn need<T>(v: Option<T>, field: &str) -> Result<T, String> {
            v.ok_or_else(|| format!("missing field `{field}`"))
        }
        let present = |names: &[(&str, bool)], allowed: &[&str]| -> Result<(), String> {
            match names.iter().find(|(n, p)| *p && !allowed.contains(n)) {
                Some((n, _)) => Err(format!("field `{n}` not valid for this kind")),
                None => Ok(()),
            }
        };
        let fields = [
            ("text", self.text.is_some()),
            ("rank", self.rank.is_some()),
            ("url", self.url.is_some()),
            ("qi", self.qi.is_some()),
            ("dwell", self.dwell.is_some()),
            ("scroll", self.scroll.is_some()),
            ("mo", self.mo.is_some()),
            ("move", self.move_px.is_some()),
        ];
        let payload = match self.k.as_str() {
            "q" => {
                present(&fields, &["text"])?;
                EventPayload::Query(Query::new(need(self.text, "text")?))
            }
            "c" => {
                present(&fields, &["rank", "url", "qi"])?;
                EventPayload::Click(Click {
                    rank: need(self.rank, "rank")?,
                    url: need(self.url, "url")?,
                    query_index: self.qi,
                })
            }
            "v" => {
                present(&fields, &["url", "dwell", "scroll", "mo"])?;
                EventPayload::PageView(PageView {
                    url: need(self.url, "url")?,
                    dwell_ms: need(self.dwell, "dwell")?,
                    scroll_px: need(self.scroll, "scroll")?,
                    mouseover_count: need(self.mo, "mo")?,
                })
            }
            "m" => {
                present(&fields, &["scroll", "mo", "move"])?;
                EventPayload::Mouse(MouseActivity {
                    scroll_px: need(self.scroll, "scroll")?,
                    mouseover_count: need(self.mo, "mo")?,
                    move_px: need(self.move_px, "move")?,
                })
            }
            other => return Err(format!("unknown event kind {other:?}")),
        };
        Ok(Event { user_id: self.u, timestamp: self.t, session_id: self.sid, payload })
    }
}

/// Serializes one event as a canonical log line (no trailing newline).
pub fn event_to_line(e: &Event) -> String {
    serde_json::to_string(&Record::from_event(e)).expect("event records always serialize")
}

fn strip_eol(mut line: Vec<u8>) -> Vec<u8> {
    if line.last() == Some(&b'\n') {
        line.pop();
        if line.last() == Some(&b'\r') {
            line.pop();
        }
    }
    line
}

/// Reads lines, checking the header. Yields `(line_number, content)` for every
/// non-empty line after the header; undecodable lines yield `Err(reason)`.
fn read_body<R: BufRead>(
    mut reader: R,
    header: &'static str,
    mut on_line: impl FnMut(usize, Result<String, String>) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    let mut buf = Vec::new();
    let mut lineno = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        lineno += 1;
        let raw = strip_eol(std::mem::take(&mut buf));
        if lineno == 1 {
            if raw != header.as_bytes() {
                return Err(IngestError::BadHeader { expected: header, found: String::from_utf8_lossy(&raw).into() });
            }
            continue;
        }
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let content = String::from_utf8(raw).map_err(|e| format!("invalid UTF-8: {e}"));
        on_line(lineno, content)?;
    }
    Ok(())
}

/// Parses a JSON-lines event log. Only I/O failures and a bad header abort;
/// malformed records become diagnostics.
pub fn parse_event_log<R: BufRead>(reader: R) -> Result<ParsedLog, IngestError> {
    let mut out = ParsedLog::default();
    read_body(reader, LOG_HEADER, |line, content| {
        let parsed = content.and_then(|text| {
            serde_json::from_str::<Record>(&text).map_err(|e| e.to_string()).and_then(Record::into_event)
        });
        match parsed {
            Ok(ev) => out.events.push(ev),
            Err(reason) => out.diagnostics.push(Diagnostic { line, reason }),
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn write_event_log<W: Write>(events: &[Event], mut w: W) -> io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for e in events {
        writeln!(w, "{}", event_to_line(e))?;
    }
    Ok(())
}

/// Loads `session_id<TAB>label` lines. Repeating a session with the same
/// label is accepted; a different label is a conflict.
pub fn load_labels<R: BufRead>(reader: R) -> Result<BTreeMap<String, IntentClass>, IngestError> {
    let mut labels = BTreeMap::new();
    read_body(reader, LABELS_HEADER, |line, content| {
        let content = content.map_err(|_| IngestError::MalformedLabelLine { line })?;
        let mut cols = content.split('\t');
        let (Some(sid), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(IngestError::MalformedLabelLine { line });
        };
        let sid = sid.trim();
        if sid.is_empty() {
            return Err(IngestError::MalformedLabelLine { line });
        }
        let class: IntentClass =
            label.parse().map_err(|_| IngestError::UnknownLabel { line, label: label.trim().to_string() })?;
        if let Some(&prev) = labels.get(sid) {
            if prev != class {
                return Err(IngestError::DuplicateConflict { session_id: sid.to_string(), first: prev, second: class });
            }
        }
        labels.insert(sid.to_string(), class);
        Ok(())
    })?;
    Ok(labels)
}

pub fn write_labels<'a, W: Write>(
    labels: impl IntoIterator<Item = (&'a str, IntentClass)>,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{LABELS_HEADER}")?;
    for (sid, class) in labels {
        writeln!(w, "{sid}\t{class}")?;
    }
    Ok(())
}

/// How events are grouped into sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPolicy {
    /// Every event carries a `sid`.
    ByField,
    /// Per-user temporal-gap segmentation; any `sid` in the log is ignored.
    ByGap(GapPolicy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Sorted by session id; ids are unique.
    pub sessions: Vec<Session>,
    /// Fraction of sessions carrying a label, 0 for an empty corpus.
    pub label_coverage: f64,
}

impl Corpus {
    pub fn event_count(&self) -> usize {
        self.sessions.iter().map(|s| s.events.len()).sum()
    }

    /// Labeled-session counts in [`IntentClass`] ordinal order.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for s in &self.sessions {
            if let Some(l) = s.label {
                counts[l.index()] += 1;
            }
        }
        counts
    }
}

/// Groups events into validated sessions and attaches labels.
///
/// Events are stably sorted by timestamp within each group, so equal
/// timestamps keep their log order.
pub fn build_corpus(
    events: Vec<Event>,
    labels: &BTreeMap<String, IntentClass>,
    policy: SessionPolicy,
) -> Result<Corpus, IngestError> {
    let mut sessions = match policy {
        SessionPolicy::ByField => {
            let mut groups: BTreeMap<String, Vec<Event>> = BTreeMap::new();
            for (index, e) in events.into_iter().enumerate() {
                let sid = e.session_id.clone().ok_or(IngestError::MissingSessionId { index })?;
                groups.entry(sid).or_default().push(e);
            }
            let groups: Vec<(String, Vec<Event>)> = groups.into_iter().collect();
            par::try_map_slice(&groups, |(sid, evs)| {
                let mut evs = evs.clone();
                evs.sort_by_key(|e| e.timestamp);
                let user = evs[0].user_id.clone();
                if evs.iter().any(|e| e.user_id != user) {
                    return Err(IngestError::MixedUsers { session_id: sid.clone() });
                }
                Ok(Session::new(sid.clone(), user, evs))
            })?
        }
        SessionPolicy::ByGap(gap) => {
            let mut by_user: BTreeMap<String, Vec<Event>> = BTreeMap::new();
            for e in events {
                by_user.entry(e.user_id.clone()).or_default().push(e);
            }
            let users: Vec<(String, Vec<Event>)> = by_user.into_iter().collect();
            let per_user = par::try_map_slice(&users, |(user, evs)| {
                let mut evs = evs.clone();
                evs.sort_by_key(|e| e.timestamp);
                segment_by_gap(&evs, gap).map_err(|source| IngestError::Segment { user_id: user.clone(), source })
            })?;
            let mut all: Vec<Session> = per_user.into_iter().flatten().collect();
            all.sort_by(|a, b| a.session_id.cmp(&b.session_id));
            all
        }
    };

    for s in &mut sessions {
        check_session(s)?;
        s.label = labels.get(&s.session_id).copied();
    }
    let labeled = sessions.iter().filter(|s| s.label.is_some()).count();
    let label_coverage = if sessions.is_empty() { 0.0 } else { labeled as f64 / sessions.len() as f64 };
    Ok(Corpus { sessions, label_coverage })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_events() -> Vec<Event> {
        vec![
            Event::query("u1", 1000, "Paris Weather").with_session("a"),
            Event::new(
                "u1",
                2000,
                EventPayload::Click(Click { rank: 2, url: "https://www.meteo.fr/paris".into(), query_index: Some(0) }),
            )
            .with_session("a"),
            Event::new(
                "u1",
                2500,
                EventPayload::PageView(PageView {
                    url: "https://www.meteo.fr/paris".into(),
                    dwell_ms: 30_000,
                    scroll_px: 800,
                    mouseover_count: 4,
                }),
            )
            .with_session("a"),
            Event::new(
                "u1",
                2600,
                EventPayload::Mouse(MouseActivity { scroll_px: 10, mouseover_count: 1, move_px: 300 }),
            )
            .with_session("a"),
            Event::new("u1", 3000, EventPayload::Click(Click { rank: 0, url: "x".into(), query_index: None }))
                .with_session("a"),
        ]
    }

    fn serialize(events: &[Event]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_event_log(events, &mut buf).unwrap();
        buf
    }

    #[test]
    fn empty_input() {
        let p = parse_event_log(&b""[..]).unwrap();
        assert!(p.events.is_empty() && p.diagnostics.is_empty());
        let p = parse_event_log(format!("{LOG_HEADER}\n").as_bytes()).unwrap();
        assert!(p.events.is_empty() && p.diagnostics.is_empty());
    }

    #[test]
    fn single_query_line() {
        let input = format!("{LOG_HEADER}\n{{\"u\":\"u1\",\"t\":5,\"k\":\"q\",\"text\":\"Foo  Bar\"}}\n");
        let p = parse_event_log(input.as_bytes()).unwrap();
        assert_eq!(p.events, vec![Event::query("u1", 5, "Foo  Bar")]);
        match &p.events[0].payload {
            EventPayload::Query(q) => assert_eq!(q.terms(), ["foo", "bar"]),
            _ => unreachable!(),
        }
        assert_eq!(serialize(&p.events), input.as_bytes());
    }

    #[test]
    fn truncated_middle_line_is_skipped() {
        let events = &sample_events()[..3];
        let text = String::from_utf8(serialize(events)).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // lines[0] is the header; corrupt the middle record.
        let mid = &lines[2];
        lines[2] = mid[..mid.len() / 2].to_string();
        let corrupted = lines.join("\n") + "\n";
        let p = parse_event_log(corrupted.as_bytes()).unwrap();
        assert_eq!(p.events, vec![events[0].clone(), events[2].clone()]);
        assert_eq!(p.diagnostics.len(), 1);
        assert_eq!(p.diagnostics[0].line, 3);
    }

    #[test]
    fn bad_records_become_diagnostics() {
        let body = [
            r#"{"u":"a","t":1,"k":"z"}"#,
            r#"{"u":"a","t":-1,"k":"q","text":"x"}"#,
            r#"{"u":"a","t":1,"k":"q"}"#,
            r#"{"u":"a","t":1,"k":"q","text":"x","url":"y"}"#,
            r#"{"u":"a","t":1,"k":"v","url":"y","dwell":-3,"scroll":0,"mo":0}"#,
            r#"{"u":"a","t":1,"k":"q","text":"x","extra":1}"#,
            "",
            r#"{"u":"a","t":1,"k":"q","text":"ok"}"#,
        ];
        let input = format!("{LOG_HEADER}\n{}\n", body.join("\n"));
        let p = parse_event_log(input.as_bytes()).unwrap();
        assert_eq!(p.events.len(), 1);
        let lines: Vec<usize> = p.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn header_is_required() {
        let err = parse_event_log(&b"{\"u\":\"a\"}\n"[..]).unwrap_err();
        assert!(matches!(err, IngestError::BadHeader { .. }));
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let bytes = serialize(&sample_events());
        let p = parse_event_log(&bytes[..]).unwrap();
        assert!(p.diagnostics.is_empty());
        assert_eq!(p.events, sample_events());
        assert_eq!(serialize(&p.events), bytes);
    }

    #[test]
    fn labels() {
        let ok = format!("{LABELS_HEADER}\ns1\tinformational\ns2\tNavigational\ns1\tinformational\n");
        let m = load_labels(ok.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["s1"], IntentClass::Informational);
        assert_eq!(m["s2"], IntentClass::Navigational);

        let unknown = format!("{LABELS_HEADER}\ns1\tnav\n");
        assert!(matches!(load_labels(unknown.as_bytes()), Err(IngestError::UnknownLabel { line: 2, .. })));

        let conflict = format!("{LABELS_HEADER}\ns1\tinformational\ns1\ttransactional\n");
        assert!(matches!(load_labels(conflict.as_bytes()), Err(IngestError::DuplicateConflict { .. })));

        let malformed = format!("{LABELS_HEADER}\ns1 informational\n");
        assert!(matches!(load_labels(malformed.as_bytes()), Err(IngestError::MalformedLabelLine { line: 2 })));
    }

    #[test]
    fn labels_round_trip() {
        let mut buf = Vec::new();
        write_labels([("a", IntentClass::Transactional), ("b", IntentClass::Informational)], &mut buf).unwrap();
        let m = load_labels(&buf[..]).unwrap();
        assert_eq!(m["a"], IntentClass::Transactional);
        assert_eq!(m["b"], IntentClass::Informational);
    }

    #[test]
    fn corpus_empty() {
        let c = build_corpus(vec![], &BTreeMap::new(), SessionPolicy::ByField).unwrap();
        assert!(c.sessions.is_empty());
        assert_eq!(c.label_coverage, 0.0);
    }

    #[test]
    fn corpus_single_group() {
        let events: Vec<Event> = (0..10).map(|i| Event::query("u", i * 1000, "q").with_session("a")).collect();
        let labels = BTreeMap::from([("a".to_string(), IntentClass::Informational)]);
        let c = build_corpus(events, &labels, SessionPolicy::ByField).unwrap();
        assert_eq!(c.sessions.len(), 1);
        assert_eq!(c.sessions[0].events.len(), 10);
        assert_eq!(c.sessions[0].label, Some(IntentClass::Informational));
        assert_eq!(c.label_coverage, 1.0);
    }

    #[test]
    fn corpus_errors_carry_session_context() {
        let events = vec![Event::new(
            "u",
            0,
            EventPayload::Mouse(MouseActivity { scroll_px: 0, mouseover_count: 0, move_px: 0 }),
        )
        .with_session("lonely")];
        let err = build_corpus(events, &BTreeMap::new(), SessionPolicy::ByField).unwrap_err();
        assert!(err.to_string().contains("lonely"), "{err}");

        let missing = vec![Event::query("u", 0, "q")];
        assert!(matches!(
            build_corpus(missing, &BTreeMap::new(), SessionPolicy::ByField),
            Err(IngestError::MissingSessionId { index: 0 })
        ));

        let mixed = vec![Event::query("u", 0, "q").with_session("s"), Event::query("v", 1, "q").with_session("s")];
        assert!(matches!(
            build_corpus(mixed, &BTreeMap::new(), SessionPolicy::ByField),
            Err(IngestError::MixedUsers { .. })
        ));
    }

    #[test]
    fn corpus_by_gap() {
        let hour = 3_600_000;
        let events = vec![
            Event::query("b", 0, "q"),
            Event::query("a", 10, "q"),
            Event::query("a", hour, "q"),
            Event::query("b", 5, "q"),
        ];
        let c = build_corpus(events, &BTreeMap::new(), SessionPolicy::ByGap(GapPolicy::default())).unwrap();
        let ids: Vec<&str> = c.sessions.iter().map(|s| s.session_id.as_str()).collect();
        assert_eq!(ids, ["a:0", "a:1", "b:0"]);
        assert_eq!(c.event_count(), 4);
    }
}
