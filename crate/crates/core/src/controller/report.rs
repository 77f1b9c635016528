//! Deterministic rendering of an investigation into a diagnosis report.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{incident_alerts, InvestigationResult};
use crate::evidence::Snapshot;
use crate::explanatory::{CausalEdge, Label};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisEntity {
    pub name: String,
    pub contributing_factor: bool,
    pub reasoning: String,
    pub evidence: String,
    /// Present on a fallback pick made without an explanatory frontier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertain: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertExplanation {
    pub alert: String,
    pub explanation: String,
    pub explained: bool,
}

/// The `agent_output.json` document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub entities: Vec<DiagnosisEntity>,
    #[serde(default)]
    pub propagations: Vec<CausalEdge>,
    #[serde(default)]
    pub alerts_explained: Vec<AlertExplanation>,
}

/// Renders `result` as a diagnosis.
///
/// Frontier members come first and are the only contributing factors. Other
/// non-Healthy nodes follow in entity order. With an empty frontier the top
/// fallback entity is reported as a contributing factor marked uncertain.
/// An alert counts as explained when a frontier node is its entity or
/// reaches it over causal edges.
pub fn finalize(result: &InvestigationResult, snapshot: &Snapshot) -> Diagnosis {
    let es = &result.explanatory_graph;
    let uncertain_pick = if result.frontier.is_empty() {
        result.fallback_ranking.first().map(|r| r.entity.clone())
    } else {
        None
    };
    let mut ordered: Vec<_> = es
        .nodes()
        .iter()
        .filter(|(_, b)| b.label != Label::Healthy)
        .collect();
    ordered.sort_by_key(|(v, _)| {
        let first = result.frontier.contains(*v) || uncertain_pick.as_ref() == Some(*v);
        (!first, (*v).clone())
    });
    let entities = ordered
        .into_iter()
        .map(|(v, b)| {
            let picked = uncertain_pick.as_ref() == Some(v);
            DiagnosisEntity {
                name: format!("{v}"),
                contributing_factor: result.frontier.contains(v) || picked,
                reasoning: b.evidence_summary.clone(),
                evidence: b.citations.join("; "),
                uncertain: picked.then_some(true),
            }
        })
        .collect();

    let alerts_explained = incident_alerts(snapshot, &result.window)
        .into_iter()
        .map(|a| {
            let by = result
                .frontier
                .iter()
                .find(|f| **f == a.entity || es.reaches(f, &a.entity));
            match by {
                Some(f) if *f == a.entity => AlertExplanation {
                    alert: a.name,
                    explanation: format!("{} is itself a root cause", a.entity),
                    explained: true,
                },
                Some(f) => AlertExplanation {
                    alert: a.name,
                    explanation: format!("{} propagated from root cause {f}", a.entity),
                    explained: true,
                },
                None => AlertExplanation {
                    alert: a.name,
                    explanation: format!("no causal path from the frontier reaches {}", a.entity),
                    explained: false,
                },
            }
        })
        .collect();

    Diagnosis {
        entities,
        propagations: es.edges().collect(),
        alerts_explained,
    }
}
