//! The Context Contract: a bounded, window-sliced view of one entity.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Alert, K8sEvent, LogLine, Message, MetricPoint, SpecChange, Snapshot};
use crate::entity::EntityId;
use crate::explanatory::ExplanatoryGraph;
use crate::graph::{Direction, EdgeKind};
use crate::time::{minutes, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Dependency,
    Ownership,
    Infrastructure,
    Traffic,
    /// A causal edge in the explanatory graph.
    Causal,
}

impl From<EdgeKind> for RelationKind {
    fn from(k: EdgeKind) -> Self {
        match k {
            EdgeKind::Dependency => RelationKind::Dependency,
            EdgeKind::Ownership => RelationKind::Ownership,
            EdgeKind::Infrastructure => RelationKind::Infrastructure,
            EdgeKind::Traffic => RelationKind::Traffic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    /// `upstream` when the neighbor is the edge source.
    pub direction: Direction,
}

/// A one-hop neighbor and every relation connecting it to the packet entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborRef {
    pub entity: EntityId,
    pub relations: Vec<Relation>,
}

/// A metric series restricted to the window, with its pre-window baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricView {
    pub metric: String,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EntityId>,
    /// Mean over the baseline span before the window, when any points exist.
    pub baseline_mean: Option<f64>,
    pub points: Vec<MetricPoint>,
}

impl MetricView {
    pub fn window_mean(&self) -> Option<f64> {
        mean(self.points.iter().map(|p| p.value))
    }

    /// Relative change of the in-window mean over the baseline.
    pub fn elevation(&self) -> Option<f64> {
        let base = self.baseline_mean?;
        let now = self.window_mean()?;
        (base > 0.0).then(|| now / base - 1.0)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Position of a chunk within a chunked packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkInfo {
    pub index: usize,
    pub count: usize,
    /// Offset of the chunk's first evidence item in the unchunked packet.
    pub item_offset: usize,
    pub item_count: usize,
    /// Leading items repeated from the previous chunk.
    pub overlap_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPacket {
    pub entity: EntityId,
    pub window: TimeWindow,
    /// 1-based count of evaluations of this entity including the current one.
    pub visit_index: u32,
    pub alerts: Vec<Alert>,
    pub events: Vec<K8sEvent>,
    pub spec_changes: Vec<SpecChange>,
    pub metrics: Vec<MetricView>,
    pub logs: Vec<LogLine>,
    pub neighbors: Vec<NeighborRef>,
    pub inbox: Vec<Message>,
    pub page: usize,
    pub total_pages: usize,
    pub size_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk: Option<ChunkInfo>,
}

impl ContextPacket {
    /// Serialized size with `size_bytes` itself zeroed.
    pub fn measure(&self) -> usize {
        let mut probe = self.clone();
        probe.size_bytes = 0;
        serde_json::to_vec(&probe).map(|v| v.len()).unwrap_or(0)
    }

    pub fn has_evidence(&self) -> bool {
        !(self.alerts.is_empty()
            && self.events.is_empty()
            && self.spec_changes.is_empty()
            && self.metrics.is_empty()
            && self.logs.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("page {page} out of range (1..={total_pages})")]
    PageOutOfRange { page: usize, total_pages: usize },
    #[error("page and deps_per_page must be at least 1")]
    InvalidPaging,
}

/// Parameters of one context fetch.
#[derive(Debug, Clone)]
pub struct ContextRequest {
    pub entity: EntityId,
    pub window: TimeWindow,
    pub visit_index: u32,
    pub page: usize,
    pub deps_per_page: usize,
    pub baseline_minutes: i64,
}

impl ContextRequest {
    pub fn new(entity: EntityId, window: TimeWindow) -> Self {
        Self {
            entity,
            window,
            visit_index: 1,
            page: 1,
            deps_per_page: 3,
            baseline_minutes: 30,
        }
    }
}

/// Union of topology neighbors and explanatory-graph edge endpoints.
pub(crate) fn collect_neighbors(
    snapshot: &Snapshot,
    es: &ExplanatoryGraph,
    entity: &EntityId,
) -> Vec<NeighborRef> {
    let mut by_entity: BTreeMap<EntityId, Vec<Relation>> = BTreeMap::new();
    if snapshot.topology.contains(entity) {
        for ((n, kind, direction), _, _) in snapshot.topology.incident(entity) {
            by_entity.entry(n.clone()).or_default().push(Relation {
                kind: kind.into(),
                direction,
            });
        }
    }
    for e in es.stored_edges() {
        let (n, direction) = if &e.source == entity {
            (&e.target, Direction::Downstream)
        } else if &e.target == entity {
            (&e.source, Direction::Upstream)
        } else {
            continue;
        };
        by_entity.entry(n.clone()).or_default().push(Relation {
            kind: RelationKind::Causal,
            direction,
        });
    }
    by_entity
        .into_iter()
        .map(|(entity, mut relations)| {
            relations.sort();
            relations.dedup();
            NeighborRef { entity, relations }
        })
        .collect()
}

/// Assembles the context packet for `req.entity`.
///
/// Evidence is restricted to the window (alert intervals are clipped to it),
/// staged metric series are withheld before the second visit, and the
/// neighbor list is paginated `deps_per_page` at a time.
pub fn get_context(
    snapshot: &Snapshot,
    es: &ExplanatoryGraph,
    req: &ContextRequest,
    inbox: &[Message],
) -> Result<ContextPacket, ContextError> {
    if req.page == 0 || req.deps_per_page == 0 {
        return Err(ContextError::InvalidPaging);
    }
    let entity = &req.entity;
    let known = snapshot.topology.contains(entity)
        || es.contains_node(entity)
        || es
            .stored_edges()
            .iter()
            .any(|e| &e.source == entity || &e.target == entity);
    if !known {
        return Err(ContextError::UnknownEntity(entity.clone()));
    }
    let w = req.window;

    let alerts = snapshot
        .alerts
        .iter()
        .filter(|a| &a.entity == entity && w.overlaps(a.first_seen, a.last_seen))
        .map(|a| Alert {
            first_seen: a.first_seen.max(w.start()),
            last_seen: a.last_seen.min(w.end()),
            ..a.clone()
        })
        .collect();
    let events = snapshot
        .events
        .iter()
        .filter(|e| &e.entity == entity && w.contains(e.at))
        .cloned()
        .collect();
    let spec_changes = snapshot
        .spec_changes
        .iter()
        .filter(|c| &c.entity == entity && w.contains(c.at))
        .cloned()
        .collect();
    let baseline_start = w.start() - minutes(req.baseline_minutes);
    let metrics = snapshot
        .metrics
        .iter()
        .filter(|m| &m.entity == entity && (!m.staged || req.visit_index >= 2))
        .map(|m| MetricView {
            metric: m.metric.clone(),
            unit: m.unit.clone(),
            source: m.source.clone(),
            baseline_mean: mean(
                m.points
                    .iter()
                    .filter(|p| p.at >= baseline_start && p.at < w.start())
                    .map(|p| p.value),
            ),
            points: m.points.iter().filter(|p| w.contains(p.at)).copied().collect(),
        })
        .filter(|m| !m.points.is_empty())
        .collect();
    let mut logs: Vec<LogLine> = snapshot
        .logs
        .iter()
        .filter(|l| &l.entity == entity)
        .flat_map(|l| l.lines.iter().filter(|line| w.contains(line.at)).cloned())
        .collect();
    logs.sort_by_key(|a| a.at);

    let all_neighbors = collect_neighbors(snapshot, es, entity);
    let total_pages = all_neighbors.len().div_ceil(req.deps_per_page).max(1);
    if req.page > total_pages {
        return Err(ContextError::PageOutOfRange {
            page: req.page,
            total_pages,
        });
    }
    let neighbors = all_neighbors
        .into_iter()
        .skip((req.page - 1) * req.deps_per_page)
        .take(req.deps_per_page)
        .collect();

    let mut inbox: Vec<Message> = inbox.iter().filter(|m| &m.to == entity).cloned().collect();
    inbox.sort_by(|a, b| a.from.cmp(&b.from).then(a.sent_at_step.cmp(&b.sent_at_step)));

    let mut packet = ContextPacket {
        entity: entity.clone(),
        window: w,
        visit_index: req.visit_index,
        alerts,
        events,
        spec_changes,
        metrics,
        logs,
        neighbors,
        inbox,
        page: req.page,
        total_pages,
        size_bytes: 0,
        chunk: None,
    };
    packet.size_bytes = packet.measure();
    Ok(packet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::parse_entity_id;
    use crate::evidence::{EventType, LogChunk, MetricSeries, Severity, Signal};
    use crate::explanatory::CausalEdge;
    use crate::graph::{OperationalGraph, TopologyEdge};
    use crate::time::Timestamp;
    use alloc::collections::BTreeSet;
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn ts(min: i64) -> Timestamp {
        "2025-06-01T10:00:00Z".parse::<Timestamp>().unwrap() + minutes(min)
    }

    fn id(n: &str) -> EntityId {
        parse_entity_id(&format!("otel-demo/Deployment/{n}")).unwrap()
    }

    fn star(n: usize) -> Snapshot {
        let hub = id("hub");
        let leaves: Vec<EntityId> = (0..n).map(|i| id(&format!("leaf{i}"))).collect();
        let edges = leaves.iter().map(|l| TopologyEdge {
            src: hub.clone(),
            dst: l.clone(),
            kind: EdgeKind::Dependency,
        });
        Snapshot {
            topology: OperationalGraph::new(leaves.iter().cloned().chain([hub.clone()]), edges)
                .unwrap(),
            ..Snapshot::default()
        }
    }

    fn window() -> TimeWindow {
        TimeWindow::new(ts(0), ts(30)).unwrap()
    }

    #[test]
    fn pagination_arithmetic() {
        let snap = star(7);
        let es = ExplanatoryGraph::new();
        let mut req = ContextRequest::new(id("hub"), window());
        let p1 = get_context(&snap, &es, &req, &[]).unwrap();
        assert_eq!((p1.total_pages, p1.neighbors.len()), (3, 3));
        req.page = 3;
        let p3 = get_context(&snap, &es, &req, &[]).unwrap();
        assert_eq!(p3.neighbors.len(), 1);
        req.page = 4;
        assert_eq!(
            get_context(&snap, &es, &req, &[]),
            Err(ContextError::PageOutOfRange { page: 4, total_pages: 3 })
        );
    }

    #[test]
    fn healthy_entity_has_empty_packet() {
        let snap = star(1);
        let req = ContextRequest::new(id("leaf0"), window());
        let p = get_context(&snap, &ExplanatoryGraph::new(), &req, &[]).unwrap();
        assert!(!p.has_evidence());
        assert!(p.inbox.is_empty());
        assert_eq!((p.page, p.total_pages), (1, 1));
        assert_eq!(p.size_bytes, p.measure());
    }

    #[test]
    fn unknown_entity_rejected_but_edge_endpoints_allowed() {
        let snap = star(1);
        let mut es = ExplanatoryGraph::new();
        let req = ContextRequest::new(id("ghost"), window());
        assert_eq!(
            get_context(&snap, &es, &req, &[]),
            Err(ContextError::UnknownEntity(id("ghost")))
        );
        es.claim(CausalEdge::new(id("ghost"), id("hub"), "c", "e").unwrap(), &id("hub"))
            .unwrap();
        let p = get_context(&snap, &es, &req, &[]).unwrap();
        assert_eq!(p.neighbors[0].entity, id("hub"));
        assert_eq!(p.neighbors[0].relations[0].kind, RelationKind::Causal);
    }

    #[test]
    fn evidence_is_window_sliced_and_staged_metrics_wait() {
        let mut snap = star(1);
        let e = id("hub");
        snap.alerts.push(Alert {
            name: "HighErrorRate".to_string(),
            entity: e.clone(),
            severity: Severity::Critical,
            signal: Signal::Errors,
            first_seen: ts(-10),
            last_seen: ts(50),
        });
        snap.events.push(K8sEvent {
            entity: e.clone(),
            reason: "OOMKilled".to_string(),
            event_type: EventType::Warning,
            message: String::new(),
            at: ts(45),
        });
        snap.metrics.push(MetricSeries {
            entity: e.clone(),
            metric: "inbound_rate_by_source".to_string(),
            unit: "rps".to_string(),
            source: Some(id("leaf0")),
            staged: true,
            points: (-40..40)
                .map(|m| MetricPoint { at: ts(m), value: if m < 0 { 100.0 } else { 130.0 } })
                .collect(),
        });
        snap.logs.push(LogChunk {
            entity: e.clone(),
            lines: [-3, 5, 31]
                .iter()
                .map(|&m| LogLine { at: ts(m), level: "ERROR".to_string(), text: "x".to_string() })
                .collect(),
        });
        let mut req = ContextRequest::new(e.clone(), window());
        let p = get_context(&snap, &ExplanatoryGraph::new(), &req, &[]).unwrap();
        assert_eq!(p.alerts[0].first_seen, ts(0));
        assert_eq!(p.alerts[0].last_seen, ts(30));
        assert!(p.events.is_empty());
        assert!(p.metrics.is_empty());
        assert_eq!(p.logs.len(), 1);
        req.visit_index = 2;
        let p = get_context(&snap, &ExplanatoryGraph::new(), &req, &[]).unwrap();
        let m = &p.metrics[0];
        assert_eq!(m.baseline_mean, Some(100.0));
        assert!((m.elevation().unwrap() - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pages_partition_the_neighbor_set(n in 0usize..20, per in 1usize..6) {
            let snap = star(n);
            let es = ExplanatoryGraph::new();
            let mut req = ContextRequest::new(id("hub"), window());
            req.deps_per_page = per;
            let first = get_context(&snap, &es, &req, &[]).unwrap();
            prop_assert_eq!(first.total_pages, n.div_ceil(per).max(1));
            let mut seen = BTreeSet::new();
            let mut count = 0;
            for page in 1..=first.total_pages {
                req.page = page;
                let p = get_context(&snap, &es, &req, &[]).unwrap();
                for nb in p.neighbors {
                    count += 1;
                    seen.insert(nb.entity);
                }
            }
            prop_assert_eq!(count, n);
            prop_assert_eq!(seen.len(), n);
        }

        #[test]
        fn packet_evidence_stays_inside_window(offsets in proptest::collection::vec(-60i64..90, 0..30)) {
            let mut snap = star(0);
            let e = id("hub");
            snap.logs.push(LogChunk {
                entity: e.clone(),
                lines: {
                    let mut o = offsets.clone();
                    o.sort();
                    o.iter().map(|&m| LogLine { at: ts(m), level: "INFO".into(), text: "t".into() }).collect()
                },
            });
            for &m in &offsets {
                snap.events.push(K8sEvent { entity: e.clone(), reason: "Pulled".into(), event_type: EventType::Normal, message: String::new(), at: ts(m) });
                snap.alerts.push(Alert { name: "a".into(), entity: e.clone(), severity: Severity::Info, signal: Signal::Other, first_seen: ts(m), last_seen: ts(m + 15) });
            }
            let req = ContextRequest::new(e, window());
            let p = get_context(&snap, &ExplanatoryGraph::new(), &req, &[]).unwrap();
            let w = window();
            prop_assert!(p.logs.iter().all(|l| w.contains(l.at)));
            prop_assert!(p.events.iter().all(|x| w.contains(x.at)));
            prop_assert!(p.alerts.iter().all(|a| w.contains(a.first_seen) && w.contains(a.last_seen)));
            // Deterministic: same inputs, identical bytes.
            let again = get_context(&snap, &ExplanatoryGraph::new(), &ContextRequest::new(id("hub"), w), &[]).unwrap();
            prop_assert_eq!(serde_json::to_vec(&p).unwrap(), serde_json::to_vec(&again).unwrap());
        }
    }
}
