//! Best-effort ranking when the frontier comes back empty.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ControllerError;
use crate::entity::EntityId;
use crate::evidence::{is_failure_reason, Snapshot};
use crate::explanatory::{ExplanatoryGraph, Label};
use crate::time::TimeWindow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackWeights {
    pub spec_change: f64,
    pub failure_event: f64,
    pub per_outgoing_edge: f64,
    pub defer: f64,
}

impl Default for FallbackWeights {
    fn default() -> Self {
        Self {
            spec_change: 2.0,
            failure_event: 1.0,
            per_outgoing_edge: 0.5,
            defer: -0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub entity: EntityId,
    pub score: f64,
}

/// Scores every non-Healthy node of `es` and sorts by descending score, then
/// entity. Spec changes and failure events are looked up in the window.
pub fn fallback_ranking(
    es: &ExplanatoryGraph,
    snapshot: &Snapshot,
    window: &TimeWindow,
    w: &FallbackWeights,
) -> Result<Vec<RankedEntity>, ControllerError> {
    if es.nodes().is_empty() {
        return Err(ControllerError::EmptyInvestigation);
    }
    let mut ranked: Vec<RankedEntity> = es
        .nodes()
        .iter()
        .filter(|(_, b)| b.label != Label::Healthy)
        .map(|(v, b)| {
            let mut score = 0.0;
            if snapshot
                .spec_changes
                .iter()
                .any(|c| &c.entity == v && window.contains(c.at))
            {
                score += w.spec_change;
            }
            if snapshot
                .events
                .iter()
                .any(|e| &e.entity == v && window.contains(e.at) && is_failure_reason(&e.reason))
            {
                score += w.failure_event;
            }
            score += w.per_outgoing_edge * es.out_degree(v) as f64;
            if b.label == Label::Defer {
                score += w.defer;
            }
            RankedEntity {
                entity: v.clone(),
                score,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.entity.cmp(&b.entity))
    });
    Ok(ranked)
}
