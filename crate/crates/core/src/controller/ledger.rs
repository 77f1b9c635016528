//! The append-only evaluation ledger, its replay and consistency checks.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::InvestigationEvent;
use crate::entity::EntityId;
use crate::explanatory::{Belief, BeliefError, CausalEdge, ExplanatoryGraph, Label};

/// One policy evaluation and everything it changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u64,
    pub entity: EntityId,
    /// 1-based visit number of `entity`.
    pub visit: u32,
    pub previous_label: Option<Label>,
    pub belief: Belief,
    pub trigger: InvestigationEvent,
    pub policy_output_digest: String,
    /// Claims asserted by this evaluation; they replace the entity's earlier ones.
    #[serde(default)]
    pub claims: Vec<CausalEdge>,
    #[serde(default)]
    pub next_candidates: Vec<EntityId>,
    pub flips: u32,
    #[serde(default)]
    pub damped: bool,
    #[serde(default)]
    pub frozen: bool,
    /// Set when the policy failed; earlier claims then stay in place.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_failure: Option<String>,
}

impl LedgerEntry {
    pub fn label_changed(&self) -> bool {
        self.previous_label != Some(self.belief.label)
    }
}

pub(crate) fn apply_entry(es: &mut ExplanatoryGraph, e: &LedgerEntry) -> Result<(), BeliefError> {
    if e.policy_failure.is_none() {
        es.withdraw_claims(&e.entity);
        for c in &e.claims {
            es.claim(c.clone(), &e.entity)?;
        }
    }
    es.set_belief(e.entity.clone(), e.belief.clone());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("monotone step violated at line {line}: step {step} after {previous}")]
    NonMonotoneStep { line: usize, step: u64, previous: u64 },
    #[error("previous label mismatch at step {step} for {entity}")]
    PreviousLabel { step: u64, entity: EntityId },
    #[error("visit count mismatch at step {step} for {entity}: recorded {recorded}, expected {expected}")]
    VisitCount { step: u64, entity: EntityId, recorded: u32, expected: u32 },
    #[error("flip count at step {step} for {entity}: {flips} flips exceeds k_thresh {k_thresh} without freezing")]
    FlipCount { step: u64, entity: EntityId, flips: u32, k_thresh: u32 },
    #[error("defer absorbing violated at step {step}: {entity} evaluated after being frozen")]
    FrozenReevaluated { step: u64, entity: EntityId },
    #[error("invalid claim at step {step}: {source_err}")]
    InvalidClaim { step: u64, source_err: BeliefError },
}

/// Rebuilds the explanatory graph from ledger entries.
pub fn replay_ledger(entries: &[LedgerEntry]) -> Result<ExplanatoryGraph, LedgerError> {
    let mut es = ExplanatoryGraph::new();
    for e in entries {
        apply_entry(&mut es, e).map_err(|source_err| LedgerError::InvalidClaim {
            step: e.step,
            source_err,
        })?;
    }
    Ok(es)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub steps: usize,
    pub entities: usize,
    pub label_changes: usize,
    pub frozen: Vec<EntityId>,
}

/// Checks internal consistency: strictly increasing steps, previous labels
/// and visit numbers that agree with earlier entries, flip counts within
/// `k_thresh` unless frozen, and no evaluation after freezing.
pub fn verify_ledger(entries: &[LedgerEntry], k_thresh: u32) -> Result<LedgerSummary, LedgerError> {
    let mut last: BTreeMap<&EntityId, &LedgerEntry> = BTreeMap::new();
    let mut previous_step = None;
    let mut label_changes = 0;
    for (i, e) in entries.iter().enumerate() {
        if let Some(p) = previous_step {
            if e.step <= p {
                return Err(LedgerError::NonMonotoneStep {
                    line: i + 1,
                    step: e.step,
                    previous: p,
                });
            }
        }
        previous_step = Some(e.step);
        let prior = last.get(&e.entity);
        if prior.is_some_and(|p| p.frozen) {
            return Err(LedgerError::FrozenReevaluated {
                step: e.step,
                entity: e.entity.clone(),
            });
        }
        if prior.map(|p| p.belief.label) != e.previous_label {
            return Err(LedgerError::PreviousLabel {
                step: e.step,
                entity: e.entity.clone(),
            });
        }
        let expected = prior.map_or(1, |p| p.visit + 1);
        if e.visit != expected {
            return Err(LedgerError::VisitCount {
                step: e.step,
                entity: e.entity.clone(),
                recorded: e.visit,
                expected,
            });
        }
        if e.flips > k_thresh && !e.frozen {
            return Err(LedgerError::FlipCount {
                step: e.step,
                entity: e.entity.clone(),
                flips: e.flips,
                k_thresh,
            });
        }
        if e.label_changed() {
            label_changes += 1;
        }
        last.insert(&e.entity, e);
    }
    Ok(LedgerSummary {
        steps: entries.len(),
        entities: last.len(),
        label_changes,
        frozen: last
            .iter()
            .filter(|(_, e)| e.frozen)
            .map(|(v, _)| (*v).clone())
            .collect(),
    })
}
