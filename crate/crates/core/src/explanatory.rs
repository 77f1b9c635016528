//! The explanatory graph: per-entity beliefs plus evidence-directed causal
//! edges (cause -> effect), and the root-cause frontier computed over it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Healthy,
    Origin,
    Symptom,
    Defer,
}

impl Label {
    /// Merge precedence used when combining chunk verdicts: anomalous findings
    /// outrank inconclusive ones, which outrank healthy ones.
    pub fn precedence(self) -> u8 {
        match self {
            Label::Origin => 3,
            Label::Symptom => 2,
            Label::Defer => 1,
            Label::Healthy => 0,
        }
    }
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Label::Healthy => "Healthy",
            Label::Origin => "Origin",
            Label::Symptom => "Symptom",
            Label::Defer => "Defer",
        })
    }
}

/// An upstream entity a node holds responsible for its own state, with the
/// condition the node cited.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attribution {
    pub entity: EntityId,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeliefError {
    #[error("belief labeled {0} must carry an evidence summary")]
    MissingEvidence(Label),
    #[error("causal edge must connect two distinct entities ({0})")]
    SelfLoop(EntityId),
    #[error("causal edge {source_id} -> {target} needs a non-empty condition and effect")]
    EmptyClaim { source_id: EntityId, target: EntityId },
}

/// An explanatory label and its evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Belief {
    pub label: Label,
    pub evidence_summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<String>,
    /// Upstream causes claimed by this node (claims whose target is the node).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributed_to: Vec<Attribution>,
    pub updated_at: u64,
}

impl Belief {
    pub fn new(
        label: Label,
        evidence_summary: impl Into<String>,
        updated_at: u64,
    ) -> Result<Self, BeliefError> {
        let evidence_summary = evidence_summary.into();
        if label != Label::Defer && evidence_summary.trim().is_empty() {
            return Err(BeliefError::MissingEvidence(label));
        }
        Ok(Self {
            label,
            evidence_summary,
            citations: Vec::new(),
            attributed_to: Vec::new(),
            updated_at,
        })
    }

    /// True when the label or the attributed causes differ. Evidence wording
    /// alone does not count as a change.
    pub fn differs_from(&self, other: &Belief) -> bool {
        self.label != other.label || self.attributed_to != other.attributed_to
    }

    pub fn blames(&self, entity: &EntityId) -> Option<&Attribution> {
        self.attributed_to.iter().find(|a| &a.entity == entity)
    }
}

/// A claimed propagation `source -> target` (cause -> effect).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CausalEdge {
    pub source: EntityId,
    pub target: EntityId,
    pub condition: String,
    pub effect: String,
}

impl CausalEdge {
    pub fn new(
        source: EntityId,
        target: EntityId,
        condition: impl Into<String>,
        effect: impl Into<String>,
    ) -> Result<Self, BeliefError> {
        let edge = Self {
            source,
            target,
            condition: condition.into(),
            effect: effect.into(),
        };
        edge.validate()?;
        Ok(edge)
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        if self.source == self.target {
            return Err(BeliefError::SelfLoop(self.source.clone()));
        }
        if self.condition.trim().is_empty() || self.effect.trim().is_empty() {
            return Err(BeliefError::EmptyClaim {
                source_id: self.source.clone(),
                target: self.target.clone(),
            });
        }
        Ok(())
    }
}

/// Edge payload as stored: the latest wording plus every node currently
/// asserting the edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEdge {
    pub source: EntityId,
    pub target: EntityId,
    pub condition: String,
    pub effect: String,
    pub claimants: BTreeSet<EntityId>,
}

/// The explanatory graph built during an investigation.
///
/// Each edge remembers which evaluated nodes claimed it. When a node is
/// re-evaluated its previous claims are withdrawn before the new ones are
/// added, so a revised explanation replaces the old one instead of leaving
/// stale edges behind. An edge disappears once no node claims it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanatoryGraph {
    nodes: BTreeMap<EntityId, Belief>,
    edges: Vec<StoredEdge>,
}

impl ExplanatoryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &BTreeMap<EntityId, Belief> {
        &self.nodes
    }

    pub fn belief(&self, v: &EntityId) -> Option<&Belief> {
        self.nodes.get(v)
    }

    pub fn contains_node(&self, v: &EntityId) -> bool {
        self.nodes.contains_key(v)
    }

    pub fn set_belief(&mut self, v: EntityId, belief: Belief) -> Option<Belief> {
        self.nodes.insert(v, belief)
    }

    /// Edges in `(source, target)` order.
    pub fn edges(&self) -> impl Iterator<Item = CausalEdge> + '_ {
        self.edges.iter().map(|e| CausalEdge {
            source: e.source.clone(),
            target: e.target.clone(),
            condition: e.condition.clone(),
            effect: e.effect.clone(),
        })
    }

    pub fn stored_edges(&self) -> &[StoredEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, source: &EntityId, target: &EntityId) -> bool {
        self.position(source, target).is_ok()
    }

    fn position(&self, source: &EntityId, target: &EntityId) -> Result<usize, usize> {
        self.edges
            .binary_search_by(|e| (&e.source, &e.target).cmp(&(source, target)))
    }

    /// Adds or re-words `edge`, recording `claimant` as a supporter.
    pub fn claim(&mut self, edge: CausalEdge, claimant: &EntityId) -> Result<(), BeliefError> {
        edge.validate()?;
        match self.position(&edge.source, &edge.target) {
            Ok(i) => {
                let stored = &mut self.edges[i];
                stored.condition = edge.condition;
                stored.effect = edge.effect;
                stored.claimants.insert(claimant.clone());
            }
            Err(i) => {
                let mut claimants = BTreeSet::new();
                claimants.insert(claimant.clone());
                self.edges.insert(
                    i,
                    StoredEdge {
                        source: edge.source,
                        target: edge.target,
                        condition: edge.condition,
                        effect: edge.effect,
                        claimants,
                    },
                );
            }
        }
        Ok(())
    }

    /// Withdraws every claim made by `claimant`; returns the edges removed.
    pub fn withdraw_claims(&mut self, claimant: &EntityId) -> Vec<CausalEdge> {
        let mut removed = Vec::new();
        self.edges.retain_mut(|e| {
            if e.claimants.remove(claimant) && e.claimants.is_empty() {
                removed.push(CausalEdge {
                    source: e.source.clone(),
                    target: e.target.clone(),
                    condition: e.condition.clone(),
                    effect: e.effect.clone(),
                });
                false
            } else {
                true
            }
        });
        removed
    }

    /// Entities sharing a causal edge with `v`.
    pub fn edge_neighbors(&self, v: &EntityId) -> BTreeSet<EntityId> {
        let mut out = BTreeSet::new();
        for e in &self.edges {
            if &e.source == v {
                out.insert(e.target.clone());
            } else if &e.target == v {
                out.insert(e.source.clone());
            }
        }
        out
    }

    pub fn out_degree(&self, v: &EntityId) -> usize {
        self.edges.iter().filter(|e| &e.source == v).count()
    }

    /// Nodes reachable from `u` over one or more causal edges.
    fn reachable_from(&self, u: &EntityId) -> BTreeSet<&EntityId> {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![u];
        while let Some(cur) = stack.pop() {
            for e in self.edges.iter().filter(|e| &e.source == cur) {
                if seen.insert(&e.target) {
                    stack.push(&e.target);
                }
            }
        }
        seen
    }

    /// `u ⇝ v`: a directed path of at least one causal edge. `u` reaches itself
    /// only through a cycle.
    pub fn reaches(&self, u: &EntityId, v: &EntityId) -> bool {
        self.reachable_from(u).contains(v)
    }

    /// Origin nodes with no *other* Origin node reaching them.
    pub fn compute_frontier(&self) -> BTreeSet<EntityId> {
        let origins: Vec<&EntityId> = self
            .nodes
            .iter()
            .filter(|(_, b)| b.label == Label::Origin)
            .map(|(v, _)| v)
            .collect();
        let mut shadowed = BTreeSet::new();
        for u in &origins {
            for v in self.reachable_from(u) {
                if v != *u {
                    shadowed.insert(v);
                }
            }
        }
        origins
            .into_iter()
            .filter(|v| !shadowed.contains(v))
            .cloned()
            .collect()
    }
}
