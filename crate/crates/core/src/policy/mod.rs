//! The abductive policy interface and the built-in implementations.

mod adversarial;
mod merge;
mod oracle;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entity::EntityId;
use crate::evidence::ContextPacket;
use crate::explanatory::{CausalEdge, Label};

pub use adversarial::AdversarialPolicy;
pub use merge::map_reduce_evaluate;
pub use oracle::{oracle_evaluate, OracleConfig, OraclePolicy};

/// Maximum number of proposed candidates per evaluation.
pub const MAX_NEXT_CANDIDATES: usize = 2;

/// Which way the policy suggests exploring next. Descriptive only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploreDirection {
    #[default]
    Upstream,
    Downstream,
    Ownership,
    Infrastructure,
}

/// Belief, propagation claims and next candidates returned by a policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOutput {
    pub label: Label,
    pub reasoning: String,
    #[serde(default)]
    pub evidence_citations: Vec<String>,
    #[serde(default)]
    pub propagation_claims: Vec<CausalEdge>,
    #[serde(default)]
    pub next_candidates: Vec<EntityId>,
    #[serde(default)]
    pub direction: ExploreDirection,
}

impl PolicyOutput {
    pub fn new(label: Label, reasoning: impl Into<String>) -> Self {
        Self {
            label,
            reasoning: reasoning.into(),
            evidence_citations: Vec::new(),
            propagation_claims: Vec::new(),
            next_candidates: Vec::new(),
            direction: ExploreDirection::Upstream,
        }
    }

    /// Checks the output contract for an evaluation of `entity`.
    pub fn validate(&self, entity: &EntityId) -> Result<(), PolicyError> {
        let violation = |msg: String| Err(PolicyError::SchemaViolation(msg));
        if self.next_candidates.len() > MAX_NEXT_CANDIDATES {
            return violation(alloc::format!(
                "next_candidates has {} entries (max {MAX_NEXT_CANDIDATES})",
                self.next_candidates.len()
            ));
        }
        if self.label != Label::Defer && self.evidence_citations.is_empty() {
            return violation(alloc::format!("label {} requires evidence_citations", self.label));
        }
        if self.label != Label::Defer && self.reasoning.trim().is_empty() {
            return violation(alloc::format!("label {} requires reasoning", self.label));
        }
        let mut pairs = BTreeSet::new();
        for c in &self.propagation_claims {
            c.validate()
                .map_err(|e| PolicyError::SchemaViolation(alloc::format!("{e}")))?;
            if &c.source != entity && &c.target != entity {
                return violation(alloc::format!(
                    "claim {} -> {} does not involve {entity}",
                    c.source,
                    c.target
                ));
            }
            if !pairs.insert((&c.source, &c.target)) {
                return violation(alloc::format!("duplicate claim {} -> {}", c.source, c.target));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy transport error: {0}")]
    Transport(String),
    #[error("policy output violates schema: {0}")]
    SchemaViolation(String),
    #[error("policy failed: {0}")]
    Failure(String),
}

/// Maps a context packet to a belief, claims and candidates.
///
/// Implementations must only consult the packet. Adapters with internal
/// counters (retries, connections) take `&mut self`.
pub trait AbductivePolicy {
    fn name(&self) -> &str;

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError>;
}

impl<P: AbductivePolicy + ?Sized> AbductivePolicy for &mut P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError> {
        (**self).evaluate(packet)
    }
}

impl<P: AbductivePolicy + ?Sized> AbductivePolicy for alloc::boxed::Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError> {
        (**self).evaluate(packet)
    }
}
