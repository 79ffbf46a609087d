//! Temporal-gap session segmentation for logs without explicit session ids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Event, Session};

pub const DEFAULT_GAP_MS: u64 = 30 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPolicy {
    gap_threshold_ms: u64,
}

impl GapPolicy {
    pub fn new(gap_threshold_ms: u64) -> Result<Self, SegmentError> {
        if gap_threshold_ms == 0 {
            return Err(SegmentError::ZeroThreshold);
        }
        Ok(Self { gap_threshold_ms })
    }

    pub fn from_minutes(minutes: f64) -> Result<Self, SegmentError> {
        if !(minutes.is_finite() && minutes > 0.0) {
            return Err(SegmentError::ZeroThreshold);
        }
        Self::new((minutes * 60_000.0).round() as u64)
    }

    pub fn gap_threshold_ms(&self) -> u64 {
        self.gap_threshold_ms
    }
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self { gap_threshold_ms: DEFAULT_GAP_MS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("gap threshold must be positive")]
    ZeroThreshold,
    #[error("events are not sorted by timestamp (event {index})")]
    UnsortedInput { index: usize },
    #[error("events belong to more than one user ({first} and {other})")]
    MixedUsers { first: String, other: String },
}

/// Splits one user's time-sorted events wherever the gap to the previous
/// event exceeds the threshold. Sessions are named `<user_id>:<index>` and
/// carry no label.
pub fn segment_by_gap(events: &[Event], policy: GapPolicy) -> Result<Vec<Session>, SegmentError> {
    let Some(first) = events.first() else {
        return Ok(Vec::new());
    };
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(SegmentError::UnsortedInput { index: i + 1 });
        }
        if pair[1].user_id != first.user_id {
            return Err(SegmentError::MixedUsers { first: first.user_id.clone(), other: pair[1].user_id.clone() });
        }
    }

    let user = &first.user_id;
    let mut sessions = Vec::new();
    let mut current: Vec<Event> = Vec::new();
    for e in events {
        if let Some(prev) = current.last() {
            if e.timestamp - prev.timestamp > policy.gap_threshold_ms {
                let id = format!("{user}:{}", sessions.len());
                sessions.push(Session::new(id, user.clone(), std::mem::take(&mut current)));
            }
        }
        current.push(e.clone());
    }
    let id = format!("{user}:{}", sessions.len());
    sessions.push(Session::new(id, user.clone(), current));
    Ok(sessions)
}
