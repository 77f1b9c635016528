//! The operational topology: registered entities and their relationships.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// `src` calls or depends on `dst`.
    Dependency,
    /// `src` owns `dst` (Deployment -> Pod, ConfigMap -> Deployment).
    Ownership,
    /// `src` is scheduled on `dst`.
    Infrastructure,
    /// `src` sends load to `dst`.
    Traffic,
}

/// Which side of an edge a neighbor query follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Sources of edges pointing at the entity.
    Upstream,
    /// Targets of edges leaving the entity.
    Downstream,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TopologyEdge {
    pub src: EntityId,
    pub dst: EntityId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("edge {src} -> {dst} references an entity missing from the node set")]
    DanglingEdge { src: EntityId, dst: EntityId },
}

/// Directed topology `G = (V, E)`. Cycles are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct OperationalGraph {
    nodes: BTreeSet<EntityId>,
    edges: BTreeSet<TopologyEdge>,
}

/// On-disk shape of `topology.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: Vec<EntityId>,
    #[serde(default)]
    pub edges: Vec<TopologyEdge>,
}

impl TryFrom<TopologyFile> for OperationalGraph {
    type Error = GraphError;

    fn try_from(file: TopologyFile) -> Result<Self, Self::Error> {
        OperationalGraph::new(file.nodes, file.edges)
    }
}

impl From<OperationalGraph> for TopologyFile {
    fn from(g: OperationalGraph) -> Self {
        TopologyFile {
            nodes: g.nodes.into_iter().collect(),
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl OperationalGraph {
    pub fn new(
        nodes: impl IntoIterator<Item = EntityId>,
        edges: impl IntoIterator<Item = TopologyEdge>,
    ) -> Result<Self, GraphError> {
        let nodes: BTreeSet<EntityId> = nodes.into_iter().collect();
        let mut set = BTreeSet::new();
        for e in edges {
            if !nodes.contains(&e.src) || !nodes.contains(&e.dst) {
                return Err(GraphError::DanglingEdge {
                    src: e.src,
                    dst: e.dst,
                });
            }
            set.insert(e);
        }
        Ok(Self { nodes, edges: set })
    }

    pub fn nodes(&self) -> &BTreeSet<EntityId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<TopologyEdge> {
        &self.edges
    }

    pub fn contains(&self, v: &EntityId) -> bool {
        self.nodes.contains(v)
    }

    /// Neighbors of `v` in lexicographic order, deduplicated.
    pub fn neighbors(
        &self,
        v: &EntityId,
        direction: Direction,
        kind_filter: Option<EdgeKind>,
    ) -> Result<Vec<EntityId>, GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownEntity(v.clone()));
        }
        let mut out = BTreeSet::new();
        for (neighbor, _, _) in self.incident(v) {
            let (n, kind, dir) = neighbor;
            if kind_filter.is_some_and(|k| k != kind) {
                continue;
            }
            if direction == Direction::Both || direction == dir {
                out.insert(n.clone());
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Every edge touching `v`, as `((neighbor, kind, side), src, dst)` where
    /// `side` says whether the neighbor is upstream or downstream of `v`.
    pub fn incident<'a>(
        &'a self,
        v: &'a EntityId,
    ) -> impl Iterator<Item = ((&'a EntityId, EdgeKind, Direction), &'a EntityId, &'a EntityId)> + 'a
    {
        self.edges.iter().filter_map(move |e| {
            if &e.dst == v && &e.src != v {
                Some(((&e.src, e.kind, Direction::Upstream), &e.src, &e.dst))
            } else if &e.src == v && &e.dst != v {
                Some(((&e.dst, e.kind, Direction::Downstream), &e.src, &e.dst))
            } else {
                None
            }
        })
    }

    /// Directed path from `from` to `to` over topology edges of any kind.
    pub fn has_path(&self, from: &EntityId, to: &EntityId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![from];
        while let Some(cur) = stack.pop() {
            for e in self.edges.iter().filter(|e| &e.src == cur) {
                if &e.dst == to {
                    return true;
                }
                if seen.insert(&e.dst) {
                    stack.push(&e.dst);
                }
            }
        }
        false
    }
}
