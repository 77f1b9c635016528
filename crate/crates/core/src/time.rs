//! Timestamps and investigation windows.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

/// UTC instant, serialized as RFC3339.
pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("time window start {start} is after end {end}")]
pub struct InvalidWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct TimeWindow {
    start: Timestamp,
    end: Timestamp,
}

#[derive(Deserialize)]
struct RawWindow {
    start: Timestamp,
    end: Timestamp,
}

impl TryFrom<RawWindow> for TimeWindow {
    type Error = InvalidWindow;

    fn try_from(raw: RawWindow) -> Result<Self, Self::Error> {
        TimeWindow::new(raw.start, raw.end)
    }
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, InvalidWindow> {
        if start > end {
            return Err(InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn contains(&self, at: Timestamp) -> bool {
        self.start <= at && at <= self.end
    }

    /// True when `[a, b]` intersects the window.
    pub fn overlaps(&self, a: Timestamp, b: Timestamp) -> bool {
        a <= self.end && b >= self.start
    }
}

pub fn minutes(n: i64) -> Duration {
    Duration::minutes(n)
}
