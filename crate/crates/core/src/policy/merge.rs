//! Map-reduce evaluation over the chunks of one logical packet.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{AbductivePolicy, PolicyError, PolicyOutput, MAX_NEXT_CANDIDATES};
use crate::evidence::ContextPacket;

/// Evaluates every chunk with `inner` and merges the verdicts.
///
/// The label with the highest precedence wins (Origin, Symptom, Defer,
/// Healthy) and its chunk supplies the reasoning and direction. Claims are
/// unioned by `(source, target)` keeping the first wording, citations are
/// concatenated and candidates are the first two distinct proposals. Failed
/// chunks are skipped; the call fails only if every chunk fails.
pub fn map_reduce_evaluate<P: AbductivePolicy + ?Sized>(
    chunks: &[ContextPacket],
    inner: &mut P,
) -> Result<PolicyOutput, PolicyError> {
    let mut outputs = Vec::new();
    let mut last_err = None;
    for c in chunks {
        match inner.evaluate(c) {
            Ok(o) => outputs.push(o),
            Err(e) => last_err = Some(e),
        }
    }
    if outputs.is_empty() {
        return Err(last_err.unwrap_or_else(|| PolicyError::Failure("no chunks to evaluate".into())));
    }
    let winner = outputs
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.label.precedence().cmp(&b.label.precedence()).then(j.cmp(i)))
        .map(|(i, _)| i)
        .expect("non-empty");
    let mut merged = PolicyOutput::new(outputs[winner].label, outputs[winner].reasoning.clone());
    merged.direction = outputs[winner].direction;
    let mut pairs = BTreeSet::new();
    let mut seen_candidates = BTreeSet::new();
    for o in &outputs {
        merged.evidence_citations.extend(o.evidence_citations.iter().cloned());
        for c in &o.propagation_claims {
            if pairs.insert((c.source.clone(), c.target.clone())) {
                merged.propagation_claims.push(c.clone());
            }
        }
        for n in &o.next_candidates {
            if merged.next_candidates.len() < MAX_NEXT_CANDIDATES && seen_candidates.insert(n.clone()) {
                merged.next_candidates.push(n.clone());
            }
        }
    }
    Ok(merged)
}
