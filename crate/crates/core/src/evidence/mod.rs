//! Observability evidence: snapshot types, window selection, relevance
//! filtering and the per-entity context packet.

mod chunk;
mod context;
mod filter;
mod window;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::EntityId;
use crate::explanatory::Belief;
use crate::graph::OperationalGraph;
use crate::time::Timestamp;

pub use chunk::{chunk_packet, reassemble, EvidenceItem};
pub use context::{
    get_context, ChunkInfo, ContextError, ContextPacket, ContextRequest, MetricView, NeighborRef,
    Relation, RelationKind,
};
pub use filter::{
    filter_events, filter_spec_changes, is_config_reason, is_failure_reason, is_resource_failure,
    EventFilterContext,
};
pub use window::{is_watchdog, select_window};

/// Tunables shared by window selection, filtering and context assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    /// Minutes added before the earliest anchor alert.
    pub lead_margin_minutes: i64,
    /// Changes this many minutes before the window start rank highest.
    pub pre_incident_margin_minutes: i64,
    /// Baseline span before the window used for metric comparisons.
    pub baseline_minutes: i64,
    pub max_per_page: usize,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            lead_margin_minutes: 5,
            pre_incident_margin_minutes: 15,
            baseline_minutes: 30,
            max_per_page: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvidenceError {
    #[error("no alerts to anchor an investigation window")]
    NoAlerts,
    #[error("invalid evidence: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Critical,
    Warning,
    Info,
}

/// Golden-signal family an alert belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Errors,
    Latency,
    Traffic,
    Saturation,
    Other,
}

impl Signal {
    /// Signals that may anchor an investigation window.
    pub fn is_golden(self) -> bool {
        matches!(self, Signal::Errors | Signal::Latency | Signal::Traffic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub name: String,
    pub entity: EntityId,
    pub severity: Severity,
    pub signal: Signal,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Normal,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct K8sEvent {
    pub entity: EntityId,
    pub reason: String,
    #[serde(rename = "type")]
    pub event_type: EventType,
    #[serde(default)]
    pub message: String,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecChange {
    pub entity: EntityId,
    pub at: Timestamp,
    #[serde(default)]
    pub diff_summary: String,
    #[serde(default)]
    pub fields_changed: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub at: Timestamp,
    pub value: f64,
}

/// Metric names the oracle policy understands.
pub mod metric_names {
    pub const INBOUND_RATE_BY_SOURCE: &str = "inbound_rate_by_source";
    pub const REQUEST_RATE: &str = "request_rate";
    pub const MEMORY: &str = "memory";
    pub const ERROR_RATE: &str = "error_rate";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub entity: EntityId,
    pub metric: String,
    #[serde(default)]
    pub unit: String,
    /// Sending entity for per-source rates such as `inbound_rate_by_source`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EntityId>,
    /// Only surfaced from an entity's second evaluation onward.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub staged: bool,
    pub points: Vec<MetricPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLine {
    pub at: Timestamp,
    pub level: String,
    pub text: String,
}

impl LogLine {
    pub fn is_error(&self) -> bool {
        let level = self.level.as_str();
        level.eq_ignore_ascii_case("error")
            || level.eq_ignore_ascii_case("warn")
            || level.eq_ignore_ascii_case("warning")
            || level.eq_ignore_ascii_case("fatal")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogChunk {
    pub entity: EntityId,
    pub lines: Vec<LogLine>,
}

/// Immutable observability snapshot for one incident.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub topology: OperationalGraph,
    #[serde(default)]
    pub alerts: Vec<Alert>,
    #[serde(default)]
    pub events: Vec<K8sEvent>,
    #[serde(default)]
    pub spec_changes: Vec<SpecChange>,
    #[serde(default)]
    pub metrics: Vec<MetricSeries>,
    #[serde(default)]
    pub logs: Vec<LogChunk>,
}

impl Snapshot {
    /// Checks per-item invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), EvidenceError> {
        let bad = |msg: String| Err(EvidenceError::Invalid(msg));
        for a in &self.alerts {
            if a.first_seen > a.last_seen {
                return bad(alloc::format!("alert `{}` first_seen after last_seen", a.name));
            }
        }
        for e in &self.events {
            if e.reason.trim().is_empty() {
                return bad(alloc::format!("event on {} has an empty reason", e.entity));
            }
        }
        for c in &self.spec_changes {
            if !c.diff_summary.trim().is_empty() && c.fields_changed.is_empty() {
                return bad(alloc::format!("spec change on {} lists no changed fields", c.entity));
            }
        }
        for m in &self.metrics {
            if m.points.iter().any(|p| p.value.is_nan()) {
                return bad(alloc::format!("metric {} on {} contains NaN", m.metric, m.entity));
            }
            if m.points.windows(2).any(|w| w[0].at > w[1].at) {
                return bad(alloc::format!("metric {} on {} is not time-sorted", m.metric, m.entity));
            }
        }
        for l in &self.logs {
            if l.lines.windows(2).any(|w| w[0].at > w[1].at) {
                return bad(alloc::format!("logs for {} are not time-sorted", l.entity));
            }
        }
        Ok(())
    }

    /// Entities referenced by evidence but absent from the topology.
    pub fn unregistered_entities(&self) -> BTreeSet<EntityId> {
        let referenced = self
            .alerts
            .iter()
            .map(|a| &a.entity)
            .chain(self.events.iter().map(|e| &e.entity))
            .chain(self.spec_changes.iter().map(|c| &c.entity))
            .chain(self.metrics.iter().map(|m| &m.entity))
            .chain(self.metrics.iter().filter_map(|m| m.source.as_ref()))
            .chain(self.logs.iter().map(|l| &l.entity));
        referenced
            .filter(|e| !self.topology.contains(e))
            .cloned()
            .collect()
    }

    pub fn alerting_entities(&self) -> BTreeSet<EntityId> {
        self.alerts.iter().map(|a| a.entity.clone()).collect()
    }
}

/// `m_{u -> v}`: the sender's belief at broadcast time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub from: EntityId,
    pub to: EntityId,
    pub belief: Belief,
    pub sent_at_step: u64,
}

impl Message {
    pub fn new(from: EntityId, to: EntityId, belief: Belief, sent_at_step: u64) -> Option<Self> {
        (from != to).then_some(Self {
            from,
            to,
            belief,
            sent_at_step,
        })
    }
}
