//! Seed selection ordered by strength of causal evidence.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{incident_alerts, ActivationReason, ControllerError, InvestigationEvent};
use crate::entity::EntityId;
use crate::evidence::{K8sEvent, Snapshot, SpecChange};
use crate::graph::OperationalGraph;
use crate::time::{TimeWindow, Timestamp};

const SEED_FAILURES: &[&str] = &["OOMKilled", "CrashLoopBackOff", "Evicted"];

fn connected(g: &OperationalGraph, a: &EntityId, b: &EntityId) -> bool {
    g.has_path(a, b) || g.has_path(b, a)
}

/// Seed tier of `entity`, lower is stronger:
///
/// 1. a spec change no later than the earliest alert on the entity or on an
///    entity connected to it by a topology path
/// 2. a failure event (OOMKilled, CrashLoopBackOff, Evicted) on an alerting
///    entity
/// 3. a spec change on an entity with a topology path to an alerting entity
/// 4. an alerting entity
pub fn seed_tier(
    g: &OperationalGraph,
    entity: &EntityId,
    alert_onsets: &BTreeMap<EntityId, Timestamp>,
    events: &[K8sEvent],
    changes: &[SpecChange],
) -> Option<u8> {
    let related_onset = alert_onsets
        .iter()
        .filter(|(a, _)| *a == entity || connected(g, entity, a))
        .map(|(_, t)| *t)
        .min();
    let own_changes: Vec<&SpecChange> = changes.iter().filter(|c| &c.entity == entity).collect();
    if let Some(onset) = related_onset {
        if own_changes.iter().any(|c| c.at <= onset) {
            return Some(1);
        }
    }
    let alerting = alert_onsets.contains_key(entity);
    if alerting
        && events.iter().any(|e| {
            &e.entity == entity && SEED_FAILURES.iter().any(|r| r.eq_ignore_ascii_case(&e.reason))
        })
    {
        return Some(2);
    }
    if !own_changes.is_empty() && related_onset.is_some() {
        return Some(3);
    }
    alerting.then_some(4)
}

/// Initial `Activate(v, Seed)` events, strongest evidence first.
///
/// `events` and `changes` are the filtered slices; alerts are the snapshot's
/// non-watchdog alerts overlapping the window. Ties break by entity.
pub fn bootstrap(
    snapshot: &Snapshot,
    window: &TimeWindow,
    events: &[K8sEvent],
    changes: &[SpecChange],
) -> Result<Vec<InvestigationEvent>, ControllerError> {
    let alerts = incident_alerts(snapshot, window);
    if alerts.is_empty() && events.is_empty() && changes.is_empty() {
        return Err(ControllerError::NoCandidates);
    }
    let mut onsets: BTreeMap<EntityId, Timestamp> = BTreeMap::new();
    for a in &alerts {
        onsets
            .entry(a.entity.clone())
            .and_modify(|t| *t = (*t).min(a.first_seen))
            .or_insert(a.first_seen);
    }
    let mut candidates: Vec<&EntityId> = onsets
        .keys()
        .chain(events.iter().map(|e| &e.entity))
        .chain(changes.iter().map(|c| &c.entity))
        .collect();
    candidates.sort();
    candidates.dedup();
    let mut tiered: Vec<(u8, EntityId)> = candidates
        .into_iter()
        .filter_map(|v| {
            seed_tier(&snapshot.topology, v, &onsets, events, changes).map(|t| (t, v.clone()))
        })
        .collect();
    tiered.sort();
    if tiered.is_empty() {
        return Err(ControllerError::NoCandidates);
    }
    Ok(tiered
        .into_iter()
        .map(|(_, v)| InvestigationEvent::activate(v, ActivationReason::Seed))
        .collect())
}
