//! Splitting oversized context packets into overlapping chunks.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::context::{ChunkInfo, ContextPacket, MetricView};
use super::{Alert, K8sEvent, LogLine, SpecChange};

/// One evidence item of a packet, in packet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum EvidenceItem {
    Alert(Alert),
    Event(K8sEvent),
    SpecChange(SpecChange),
    Metric(MetricView),
    Log(LogLine),
}

fn items_of(p: &ContextPacket) -> Vec<EvidenceItem> {
    let mut out = Vec::new();
    out.extend(p.alerts.iter().cloned().map(EvidenceItem::Alert));
    out.extend(p.events.iter().cloned().map(EvidenceItem::Event));
    out.extend(p.spec_changes.iter().cloned().map(EvidenceItem::SpecChange));
    out.extend(p.metrics.iter().cloned().map(EvidenceItem::Metric));
    out.extend(p.logs.iter().cloned().map(EvidenceItem::Log));
    out
}

fn fill(p: &mut ContextPacket, items: impl IntoIterator<Item = EvidenceItem>) {
    for item in items {
        match item {
            EvidenceItem::Alert(a) => p.alerts.push(a),
            EvidenceItem::Event(e) => p.events.push(e),
            EvidenceItem::SpecChange(c) => p.spec_changes.push(c),
            EvidenceItem::Metric(m) => p.metrics.push(m),
            EvidenceItem::Log(l) => p.logs.push(l),
        }
    }
}

fn skeleton(p: &ContextPacket) -> ContextPacket {
    ContextPacket {
        alerts: Vec::new(),
        events: Vec::new(),
        spec_changes: Vec::new(),
        metrics: Vec::new(),
        logs: Vec::new(),
        size_bytes: 0,
        chunk: None,
        ..p.clone()
    }
}

fn item_size(item: &EvidenceItem) -> usize {
    // Each item serializes as its inner value plus a separating comma.
    let inner = match item {
        EvidenceItem::Alert(a) => serde_json::to_vec(a),
        EvidenceItem::Event(e) => serde_json::to_vec(e),
        EvidenceItem::SpecChange(c) => serde_json::to_vec(c),
        EvidenceItem::Metric(m) => serde_json::to_vec(m),
        EvidenceItem::Log(l) => serde_json::to_vec(l),
    };
    inner.map(|v| v.len()).unwrap_or(0) + 1
}

/// Splits `packet` so that every chunk measures at most `budget_bytes`.
///
/// Evidence items keep their packet order. Each chunk after the first starts
/// with `floor(overlap_fraction * len)` trailing items of its predecessor.
/// Neighbors and inbox are copied into every chunk. A single item larger than
/// the budget still gets a chunk of its own. A packet already within budget
/// comes back unchanged as the only chunk.
pub fn chunk_packet(
    packet: &ContextPacket,
    budget_bytes: usize,
    overlap_fraction: f64,
) -> Vec<ContextPacket> {
    if packet.measure() <= budget_bytes {
        return alloc::vec![packet.clone()];
    }
    let overlap_fraction = overlap_fraction.clamp(0.0, 0.49);
    let items = items_of(packet);
    let sizes: Vec<usize> = items.iter().map(item_size).collect();

    // Upper bound of the chunk's fixed part: widest possible chunk metadata.
    let mut probe = skeleton(packet);
    probe.chunk = Some(ChunkInfo {
        index: usize::MAX,
        count: usize::MAX,
        item_offset: usize::MAX,
        item_count: usize::MAX,
        overlap_items: usize::MAX,
    });
    let base = probe.measure();

    // (start, overlap, end) item ranges.
    let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
    let mut next_new = 0;
    while next_new < items.len() {
        let mut overlap = match ranges.last() {
            Some(&(start, _, end)) => ((end - start) as f64 * overlap_fraction) as usize,
            None => 0,
        };
        loop {
            let start = next_new - overlap;
            let mut used = base + sizes[start..next_new].iter().sum::<usize>();
            let mut end = next_new;
            while end < items.len() && used + sizes[end] <= budget_bytes {
                used += sizes[end];
                end += 1;
            }
            if end > next_new {
                ranges.push((start, overlap, end));
                next_new = end;
                break;
            }
            if overlap == 0 {
                // Oversized single item.
                ranges.push((start, 0, next_new + 1));
                next_new += 1;
                break;
            }
            overlap -= 1;
        }
    }

    let count = ranges.len();
    ranges
        .into_iter()
        .enumerate()
        .map(|(index, (start, overlap, end))| {
            let mut c = skeleton(packet);
            fill(&mut c, items[start..end].iter().cloned());
            c.chunk = Some(ChunkInfo {
                index,
                count,
                item_offset: start,
                item_count: end - start,
                overlap_items: overlap,
            });
            c.size_bytes = c.measure();
            c
        })
        .collect()
}

/// Inverse of [`chunk_packet`]: drops each chunk's overlap prefix and
/// concatenates the remaining evidence.
pub fn reassemble(chunks: &[ContextPacket]) -> Option<ContextPacket> {
    let first = chunks.first()?;
    if chunks.len() == 1 && first.chunk.is_none() {
        return Some(first.clone());
    }
    let mut out = skeleton(first);
    for c in chunks {
        let skip = c.chunk.map_or(0, |i| i.overlap_items);
        fill(&mut out, items_of(c).into_iter().skip(skip));
    }
    out.size_bytes = out.measure();
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{parse_entity_id, EntityId};
    use crate::evidence::context::{NeighborRef, Relation, RelationKind};
    use crate::graph::Direction;
    use crate::time::{minutes, TimeWindow, Timestamp};
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn ts(sec: i64) -> Timestamp {
        "2025-06-01T10:00:00Z".parse::<Timestamp>().unwrap() + chrono::Duration::seconds(sec)
    }

    fn id(n: &str) -> EntityId {
        parse_entity_id(&format!("otel-demo/Deployment/{n}")).unwrap()
    }

    fn packet(lines: usize) -> ContextPacket {
        let mut p = ContextPacket {
            entity: id("db"),
            window: TimeWindow::new(ts(0), ts(0) + minutes(600)).unwrap(),
            visit_index: 1,
            alerts: Vec::new(),
            events: Vec::new(),
            spec_changes: Vec::new(),
            metrics: Vec::new(),
            logs: (0..lines)
                .map(|i| LogLine {
                    at: ts(i as i64),
                    level: "INFO".to_string(),
                    text: format!("request {i} served"),
                })
                .collect(),
            neighbors: alloc::vec![NeighborRef {
                entity: id("api"),
                relations: alloc::vec![Relation {
                    kind: RelationKind::Dependency,
                    direction: Direction::Upstream,
                }],
            }],
            inbox: Vec::new(),
            page: 1,
            total_pages: 1,
            size_bytes: 0,
            chunk: None,
        };
        p.size_bytes = p.measure();
        p
    }

    #[test]
    fn under_budget_is_identity() {
        let p = packet(10);
        assert_eq!(chunk_packet(&p, 1 << 20, 0.1), alloc::vec![p]);
    }

    #[test]
    fn ten_thousand_lines_four_chunks_reassemble() {
        let p = packet(10_000);
        let budget = p.measure() * 3 / 10;
        let chunks = chunk_packet(&p, budget, 0.1);
        assert_eq!(chunks.len(), 4);
        for c in &chunks {
            assert!(c.measure() <= budget);
            assert_eq!(c.neighbors, p.neighbors);
            assert_eq!(c.inbox, p.inbox);
        }
        // Consecutive chunks share floor(0.1 * previous length) lines.
        for w in chunks.windows(2) {
            let prev = w[0].logs.len();
            let shared = w[1].chunk.unwrap().overlap_items;
            assert_eq!(shared, prev / 10);
            assert_eq!(w[1].logs[..shared], w[0].logs[prev - shared..]);
        }
        // Oracle: multiset of line texts after dropping overlaps.
        let mut seen: Vec<&str> = Vec::new();
        for c in &chunks {
            let skip = c.chunk.unwrap().overlap_items;
            seen.extend(c.logs.iter().skip(skip).map(|l| l.text.as_str()));
        }
        let mut expected: Vec<&str> = p.logs.iter().map(|l| l.text.as_str()).collect();
        seen.sort_unstable();
        expected.sort_unstable();
        assert_eq!(seen, expected);
        assert_eq!(reassemble(&chunks).unwrap(), p);
    }

    #[test]
    fn zero_overlap_partitions() {
        let p = packet(2_000);
        let chunks = chunk_packet(&p, 16 * 1024, 0.0);
        assert!(chunks.len() > 1);
        let mut offset = 0;
        for c in &chunks {
            let info = c.chunk.unwrap();
            assert_eq!((info.item_offset, info.overlap_items), (offset, 0));
            offset += info.item_count;
        }
        assert_eq!(offset, p.logs.len());
    }

    proptest! {
        #[test]
        fn reassembly_round_trips(lines in 1usize..400, budget in 4096usize..20_000, pct in 0u32..49) {
            let p = packet(lines);
            let chunks = chunk_packet(&p, budget, pct as f64 / 100.0);
            prop_assert!(chunks.iter().all(|c| c.measure() <= budget));
            prop_assert_eq!(reassemble(&chunks).unwrap(), p);
        }
    }
}
