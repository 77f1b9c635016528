//! Deterministic rule-cascade policy.
//!
//! Rules, first match wins:
//!
//! 1. a spec change precedes the entity's first anomaly: Origin
//! 2. memory/eviction failure with elevated inbound traffic: Symptom of the
//!    dominant traffic source
//! 3. memory/eviction failure otherwise (no Origin message in the inbox):
//!    Origin
//! 4. error logs naming a callee (`calling <id>`): Symptom of the callee,
//!    unless the callee already blames this entity's traffic
//! 5. a neighbor's Symptom blames this entity's traffic and inbound traffic is
//!    elevated: Symptom of the dominant traffic source
//! 6. a workload-pattern marker in the logs: Origin
//! 7. no anomalies: Healthy
//! 8. otherwise: Defer

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AbductivePolicy, ExploreDirection, PolicyError, PolicyOutput, MAX_NEXT_CANDIDATES};
use crate::entity::{parse_entity_id, EntityId};
use crate::evidence::{
    is_failure_reason, is_resource_failure, metric_names, ContextPacket, EventType, MetricView,
};
use crate::explanatory::{CausalEdge, Label};
use crate::time::Timestamp;

const OOM_MARKERS: &[&str] = &["outofmemoryerror", "oomkilled", "out of memory"];
const WORKLOAD_MARKERS: &[&str] = &["flash sale", "traffic spike", "load test started"];

/// Relative tolerance for threshold comparisons on metric ratios.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Minimum relative elevation over baseline that counts as elevated.
    pub traffic_threshold: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            traffic_threshold: 0.20,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OraclePolicy {
    pub config: OracleConfig,
}

impl OraclePolicy {
    pub fn new(config: OracleConfig) -> Self {
        Self { config }
    }
}

impl AbductivePolicy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError> {
        Ok(oracle_evaluate(packet, &self.config))
    }
}

/// Entity ids named after `calling ` in a log line.
pub(crate) fn callees_in(text: &str) -> Vec<EntityId> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find("calling ") {
        rest = &rest[i + "calling ".len()..];
        let token: String = rest
            .chars()
            .take_while(|c| !c.is_whitespace() && !matches!(c, ':' | ',' | ';' | ')' | '"' | '\''))
            .collect();
        if let Ok(id) = parse_entity_id(token.trim_end_matches('.')) {
            out.push(id);
        }
    }
    out
}

fn contains_any(text: &str, needles: &[&str]) -> bool {
    let lower = text.to_lowercase();
    needles.iter().any(|n| lower.contains(n))
}

fn fmt_pct(x: f64) -> String {
    // Rounded to whole percent without float intrinsics.
    let scaled = x * 100.0;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5) as i64
    } else {
        (scaled - 0.5) as i64
    };
    format!("{rounded:+}%")
}

struct Facts<'a> {
    packet: &'a ContextPacket,
    first_anomaly: Option<Timestamp>,
    resource_failure: Vec<String>,
    /// Sources whose inbound rate is at or above the threshold, strongest first.
    elevated_sources: Vec<(EntityId, f64)>,
    other_anomalies: Vec<String>,
}

impl<'a> Facts<'a> {
    fn gather(p: &'a ContextPacket, cfg: &OracleConfig) -> Self {
        let mut first: Option<Timestamp> = None;
        let mut note = |t: Timestamp| first = Some(first.map_or(t, |f: Timestamp| f.min(t)));
        let mut resource_failure = Vec::new();
        let mut other = Vec::new();

        for a in &p.alerts {
            note(a.first_seen);
            other.push(format!("alert {} since {}", a.name, a.first_seen.to_rfc3339()));
        }
        for e in &p.events {
            if e.event_type != EventType::Normal || is_failure_reason(&e.reason) {
                note(e.at);
                let cite = format!("event {} at {}", e.reason, e.at.to_rfc3339());
                if is_resource_failure(&e.reason) {
                    resource_failure.push(cite);
                } else {
                    other.push(cite);
                }
            }
        }
        for l in &p.logs {
            if l.is_error() {
                note(l.at);
                let cite = format!("log {} {}: {}", l.at.to_rfc3339(), l.level, l.text);
                if contains_any(&l.text, OOM_MARKERS) {
                    resource_failure.push(cite);
                } else {
                    other.push(cite);
                }
            }
        }
        let mut elevated_sources = Vec::new();
        for m in &p.metrics {
            let Some(elev) = m.elevation() else { continue };
            if elev + EPS < cfg.traffic_threshold {
                continue;
            }
            if let Some(t) = first_point_above(m, cfg) {
                note(t);
            }
            if m.metric == metric_names::INBOUND_RATE_BY_SOURCE {
                if let Some(src) = &m.source {
                    elevated_sources.push((src.clone(), elev));
                    continue;
                }
            }
            other.push(format!("metric {} {} over baseline", m.metric, fmt_pct(elev)));
        }
        // Largest elevation first, then by entity.
        elevated_sources.sort_by(|(a, x), (b, y)| {
            y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal).then_with(|| a.cmp(b))
        });
        Self {
            packet: p,
            first_anomaly: first,
            resource_failure,
            elevated_sources,
            other_anomalies: other,
        }
    }

    fn any_anomaly(&self) -> bool {
        self.first_anomaly.is_some()
    }

    fn dominant_source(&self) -> Option<&(EntityId, f64)> {
        self.elevated_sources.first()
    }

    /// Inbox Symptom beliefs that blame this entity for traffic.
    fn traffic_blame_from(&self) -> Vec<&EntityId> {
        self.packet
            .inbox
            .iter()
            .filter(|m| {
                m.belief.label == Label::Symptom
                    && m.belief
                        .blames(&self.packet.entity)
                        .is_some_and(|a| a.condition.to_lowercase().contains("traffic"))
            })
            .map(|m| &m.from)
            .collect()
    }

    /// Claims `self -> n` for every inbox Symptom that blames this entity.
    fn blamed_by_claims(&self, why: &str) -> Vec<CausalEdge> {
        let me = &self.packet.entity;
        self.packet
            .inbox
            .iter()
            .filter(|m| m.belief.label == Label::Symptom)
            .filter_map(|m| {
                let a = m.belief.blames(me)?;
                CausalEdge::new(me.clone(), m.from.clone(), a.condition.clone(), why).ok()
            })
            .collect()
    }
}

fn first_point_above(m: &MetricView, cfg: &OracleConfig) -> Option<Timestamp> {
    let base = m.baseline_mean?;
    m.points
        .iter()
        .find(|p| p.value + EPS * base >= base * (1.0 + cfg.traffic_threshold))
        .map(|p| p.at)
}

fn traffic_symptom(f: &Facts<'_>, source: &EntityId, elev: f64, effect: &str) -> PolicyOutput {
    let me = &f.packet.entity;
    let condition = format!("inbound traffic from {source} elevated {} over baseline", fmt_pct(elev));
    let mut out = PolicyOutput::new(
        Label::Symptom,
        format!("{me} is overloaded by traffic from {source}: {condition}; {effect}"),
    );
    out.evidence_citations.push(format!(
        "metric {} from {source} {}",
        metric_names::INBOUND_RATE_BY_SOURCE,
        fmt_pct(elev)
    ));
    if let Ok(edge) = CausalEdge::new(source.clone(), me.clone(), condition, effect) {
        out.propagation_claims.push(edge);
    }
    out.next_candidates.push(source.clone());
    out.direction = ExploreDirection::Upstream;
    out
}

fn origin(f: &Facts<'_>, reasoning: String, citations: Vec<String>) -> PolicyOutput {
    let mut out = PolicyOutput::new(Label::Origin, reasoning.clone());
    out.evidence_citations = citations;
    out.propagation_claims = f.blamed_by_claims(&reasoning);
    out.direction = ExploreDirection::Downstream;
    out
}

/// Applies the rule cascade to `packet`.
pub fn oracle_evaluate(packet: &ContextPacket, cfg: &OracleConfig) -> PolicyOutput {
    let f = Facts::gather(packet, cfg);
    let me = &packet.entity;

    // 1. Something changed here before anything went wrong here.
    if let Some(change) = packet
        .spec_changes
        .iter()
        .filter(|c| f.first_anomaly.is_none_or(|t| c.at <= t))
        .min_by_key(|c| c.at)
    {
        let mut cites = alloc::vec![format!(
            "spec change at {}: {} [{}]",
            change.at.to_rfc3339(),
            change.diff_summary,
            change.fields_changed.join(", ")
        )];
        cites.extend(f.other_anomalies.iter().take(3).cloned());
        let reasoning = format!(
            "{me} changed before its first anomaly: {} ({})",
            change.diff_summary,
            change.fields_changed.join(", ")
        );
        return origin(&f, reasoning, cites);
    }

    // 2. Resource failure explained by inbound load.
    if !f.resource_failure.is_empty() {
        if let Some((source, elev)) = f.dominant_source() {
            let mut out = traffic_symptom(&f, source, *elev, "memory exhaustion (OOM) under load");
            out.evidence_citations.extend(f.resource_failure.iter().cloned());
            return out;
        }
    }

    // 3. Resource failure with no external explanation.
    let origin_in_inbox = packet.inbox.iter().any(|m| m.belief.label == Label::Origin);
    if !f.resource_failure.is_empty() && !origin_in_inbox {
        let reasoning = format!("{me} exhausted its memory with no elevated inbound traffic");
        return origin(&f, reasoning, f.resource_failure.clone());
    }

    // 4. Errors calling another entity.
    let blamers: BTreeSet<&EntityId> = f.traffic_blame_from().into_iter().collect();
    let mut callees: BTreeSet<EntityId> = BTreeSet::new();
    let mut call_cites = Vec::new();
    for l in packet.logs.iter().filter(|l| l.is_error()) {
        let named: Vec<EntityId> = callees_in(&l.text)
            .into_iter()
            .filter(|c| c != me && !blamers.contains(c))
            .collect();
        if !named.is_empty() {
            call_cites.push(format!("log {} {}: {}", l.at.to_rfc3339(), l.level, l.text));
            callees.extend(named);
        }
    }
    if !callees.is_empty() {
        let names: Vec<String> = callees.iter().map(ToString::to_string).collect();
        let mut out = PolicyOutput::new(
            Label::Symptom,
            format!("{me} fails while calling {}", names.join(", ")),
        );
        call_cites.truncate(5);
        out.evidence_citations = call_cites;
        for c in &callees {
            if let Ok(edge) = CausalEdge::new(
                c.clone(),
                me.clone(),
                format!("errors from {c}"),
                format!("{me} returns errors for requests calling {c}"),
            ) {
                out.propagation_claims.push(edge);
            }
        }
        out.next_candidates = callees.into_iter().take(MAX_NEXT_CANDIDATES).collect();
        out.direction = ExploreDirection::Downstream;
        return out;
    }

    // 5. A neighbor blames our traffic and we see the load arriving too.
    if !blamers.is_empty() {
        if let Some((source, elev)) = f.dominant_source() {
            let effect = format!(
                "{me} forwards the load onward to {}",
                blamers.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
            );
            let mut out = traffic_symptom(&f, source, *elev, &effect);
            for b in &blamers {
                out.evidence_citations.push(format!("message from {b}: blames traffic from {me}"));
            }
            return out;
        }
    }

    // 6. A workload change announced in the logs.
    if let Some(l) = packet.logs.iter().find(|l| contains_any(&l.text, WORKLOAD_MARKERS)) {
        let reasoning = format!("{me} logs a workload change: {}", l.text);
        let cite = format!("log {} {}: {}", l.at.to_rfc3339(), l.level, l.text);
        return origin(&f, reasoning, alloc::vec![cite]);
    }

    // 7. Nothing anomalous.
    if !f.any_anomaly() {
        let mut out = PolicyOutput::new(Label::Healthy, format!("{me} shows no anomalies in the window"));
        out.evidence_citations.push("no anomalies".to_string());
        return out;
    }

    // 8. Anomalous but unexplained.
    let mut out = PolicyOutput::new(
        Label::Defer,
        format!("{me} is anomalous but the evidence does not point to a cause"),
    );
    out.evidence_citations = f
        .resource_failure
        .iter()
        .chain(&f.other_anomalies)
        .take(5)
        .cloned()
        .collect();
    out
}
