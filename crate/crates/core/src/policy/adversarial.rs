//! A policy that flips its label on every visit, for exercising damping.

use alloc::format;

use super::{AbductivePolicy, PolicyError, PolicyOutput};
use crate::evidence::ContextPacket;
use crate::explanatory::Label;

/// Origin on odd visits, Symptom on even ones. Never claims or proposes.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdversarialPolicy;

impl AbductivePolicy for AdversarialPolicy {
    fn name(&self) -> &str {
        "adversarial"
    }

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError> {
        let label = if packet.visit_index % 2 == 1 {
            Label::Origin
        } else {
            Label::Symptom
        };
        let mut out = PolicyOutput::new(label, format!("visit {} parity", packet.visit_index));
        out.evidence_citations
            .push(format!("visit_index={}", packet.visit_index));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::parse_entity_id;
    use crate::time::{TimeWindow, Timestamp};
    use alloc::vec::Vec;

    #[test]
    fn alternates_by_visit() {
        let at: Timestamp = "2025-06-01T10:00:00Z".parse().unwrap();
        let mut p = ContextPacket {
            entity: parse_entity_id("a/B/c").unwrap(),
            window: TimeWindow::new(at, at).unwrap(),
            visit_index: 1,
            alerts: Vec::new(),
            events: Vec::new(),
            spec_changes: Vec::new(),
            metrics: Vec::new(),
            logs: Vec::new(),
            neighbors: Vec::new(),
            inbox: Vec::new(),
            page: 1,
            total_pages: 1,
            size_bytes: 0,
            chunk: None,
        };
        let mut pol = AdversarialPolicy;
        assert_eq!(pol.evaluate(&p).unwrap().label, Label::Origin);
        p.visit_index = 2;
        let out = pol.evaluate(&p).unwrap();
        assert_eq!(out.label, Label::Symptom);
        assert!(out.next_candidates.is_empty() && out.propagation_claims.is_empty());
        out.validate(&p.entity).unwrap();
    }
}
