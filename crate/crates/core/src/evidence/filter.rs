//! Relevance filtering for Kubernetes events and spec changes.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{Alert, EventType, K8sEvent, SpecChange};
use crate::entity::EntityId;
use crate::graph::{Direction, OperationalGraph};
use crate::time::{minutes, TimeWindow, Timestamp};

const FAILURE_REASONS: &[&str] = &[
    "OOMKilled",
    "CrashLoopBackOff",
    "Evicted",
    "BackOff",
    "Failed",
    "FailedScheduling",
    "FailedMount",
    "FailedCreate",
    "QuotaExceeded",
    "Unhealthy",
    "ProbeWarning",
    "NodeNotReady",
];

const CONFIG_REASONS: &[&str] = &[
    "ScalingReplicaSet",
    "ConfigChanged",
    "Updated",
    "Rollout",
    "DeploymentRollback",
];

/// Lifecycle, probe, scheduling or resource failures.
pub fn is_failure_reason(reason: &str) -> bool {
    FAILURE_REASONS.iter().any(|r| r.eq_ignore_ascii_case(reason))
}

/// Resource exhaustion failures (memory kills and evictions).
pub fn is_resource_failure(reason: &str) -> bool {
    ["OOMKilled", "Evicted"]
        .iter()
        .any(|r| r.eq_ignore_ascii_case(reason))
}

pub fn is_config_reason(reason: &str) -> bool {
    CONFIG_REASONS.iter().any(|r| r.eq_ignore_ascii_case(reason))
}

/// What event filtering needs to know about the incident.
#[derive(Debug, Clone)]
pub struct EventFilterContext {
    pub window: TimeWindow,
    /// Earliest anchor alert onset.
    pub anchor_start: Timestamp,
    /// Alerting entities and their one-hop topology neighbors.
    pub focus: BTreeSet<EntityId>,
}

impl EventFilterContext {
    pub fn new(topology: &OperationalGraph, window: TimeWindow, anchors: &[Alert]) -> Self {
        let anchor_start = anchors
            .iter()
            .map(|a| a.first_seen)
            .min()
            .unwrap_or(window.end());
        let mut focus = BTreeSet::new();
        for a in anchors {
            focus.insert(a.entity.clone());
            if let Ok(ns) = topology.neighbors(&a.entity, Direction::Both, None) {
                focus.extend(ns);
            }
        }
        Self {
            window,
            anchor_start,
            focus,
        }
    }

    /// Lower is more relevant: precedes the anchor, on a focus entity,
    /// failure, config change, everything else.
    pub fn tier(&self, e: &K8sEvent) -> u8 {
        if e.at < self.anchor_start {
            0
        } else if self.focus.contains(&e.entity) {
            1
        } else if is_failure_reason(&e.reason) {
            2
        } else if is_config_reason(&e.reason) {
            3
        } else {
            4
        }
    }

    pub fn admits(&self, e: &K8sEvent) -> bool {
        self.window.contains(e.at)
            && (e.event_type != EventType::Normal
                || is_failure_reason(&e.reason)
                || e.at < self.anchor_start)
    }
}

/// Relevant in-window events, best first, at most `max_per_page`.
///
/// Normal events survive only when they precede the anchor alerts. Ties
/// within a tier break by timestamp, then entity, then reason.
pub fn filter_events(
    events: &[K8sEvent],
    ctx: &EventFilterContext,
    max_per_page: usize,
) -> Vec<K8sEvent> {
    let mut kept: Vec<(u8, &K8sEvent)> = events
        .iter()
        .filter(|e| ctx.admits(e))
        .map(|e| (ctx.tier(e), e))
        .collect();
    kept.sort_by(|(ta, a), (tb, b)| {
        ta.cmp(tb)
            .then(a.at.cmp(&b.at))
            .then_with(|| a.entity.cmp(&b.entity))
            .then_with(|| a.reason.cmp(&b.reason))
    });
    kept.into_iter()
        .take(max_per_page.max(1))
        .map(|(_, e)| e.clone())
        .collect()
}

pub(crate) fn change_tier(c: &SpecChange, window: &TimeWindow, pre_incident_margin: i64) -> u8 {
    let lead_in = window.start() - minutes(pre_incident_margin);
    if c.at < window.start() && c.at >= lead_in {
        0
    } else if window.contains(c.at) {
        1
    } else {
        2
    }
}

/// Spec changes ranked just-before-window, in-window, then the rest.
pub fn filter_spec_changes(
    changes: &[SpecChange],
    window: &TimeWindow,
    pre_incident_margin_minutes: i64,
    max_per_page: usize,
) -> Vec<SpecChange> {
    let mut ranked: Vec<(u8, &SpecChange)> = changes
        .iter()
        .map(|c| (change_tier(c, window, pre_incident_margin_minutes), c))
        .collect();
    ranked.sort_by(|(ta, a), (tb, b)| {
        ta.cmp(tb)
            .then(a.at.cmp(&b.at))
            .then_with(|| a.entity.cmp(&b.entity))
            .then_with(|| a.diff_summary.cmp(&b.diff_summary))
    });
    ranked
        .into_iter()
        .take(max_per_page.max(1))
        .map(|(_, c)| c.clone())
        .collect()
}
