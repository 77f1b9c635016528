use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::EntityId;

/// A set of entities matched by a name pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtGroup {
    pub id: String,
    pub kind: String,
    /// Regex patterns matched against the whole entity name.
    pub filter: Vec<String>,
    pub namespace: String,
    pub root_cause: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtPropagation {
    pub source: String,
    pub target: String,
    pub condition: String,
    pub effect: String,
    /// Terms a correct explanation of `condition` mentions.
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub resource_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub groups: Vec<GtGroup>,
    /// Groups naming the same physical component.
    #[serde(default)]
    pub aliases: Vec<Vec<String>>,
    #[serde(default)]
    pub propagations: Vec<GtPropagation>,
}

fn deployment_group(service: &str) -> String {
    format!("{service}-deployment")
}

impl GroundTruth {
    /// Ground truth for a fault chain whose root sits at `root_idx`.
    ///
    /// Each service gets Deployment, Pod and Service groups tied together as
    /// aliases. Propagations run between Deployment groups away from the root.
    pub(crate) fn for_chain(
        namespace: &str,
        chain: &[EntityId],
        root_idx: usize,
        root_condition: &str,
        keywords: &[&str],
        resource_terms: &[&str],
    ) -> Self {
        let mut gt = GroundTruth::default();
        for (i, e) in chain.iter().enumerate() {
            let svc = e.name();
            let root = i == root_idx;
            let mut alias = Vec::new();
            for (kind, suffix, filter) in [
                ("Deployment", "deployment", svc.to_string()),
                ("Pod", "pod", format!("{svc}-.*")),
                ("Service", "service", svc.to_string()),
            ] {
                let id = format!("{svc}-{suffix}");
                gt.groups.push(GtGroup {
                    id: id.clone(),
                    kind: kind.to_string(),
                    filter: alloc::vec![filter],
                    namespace: namespace.to_string(),
                    root_cause: root,
                });
                alias.push(id);
            }
            gt.aliases.push(alias);
        }
        let hops: Vec<(usize, usize)> = if root_idx == 0 {
            (0..chain.len() - 1).map(|i| (i, i + 1)).collect()
        } else {
            (0..chain.len() - 1).rev().map(|i| (i + 1, i)).collect()
        };
        for (s, t) in hops {
            let from_root = s == root_idx;
            gt.propagations.push(GtPropagation {
                source: deployment_group(chain[s].name()),
                target: deployment_group(chain[t].name()),
                condition: if from_root {
                    root_condition.to_string()
                } else {
                    format!("{} degraded", chain[s].name())
                },
                effect: format!("{} returns errors", chain[t].name()),
                keywords: if from_root {
                    keywords.iter().map(|k| k.to_string()).collect()
                } else {
                    Vec::new()
                },
                resource_terms: if from_root {
                    resource_terms.iter().map(|k| k.to_string()).collect()
                } else {
                    Vec::new()
                },
            });
        }
        gt
    }

    pub fn root_groups(&self) -> impl Iterator<Item = &GtGroup> {
        self.groups.iter().filter(|g| g.root_cause)
    }

    /// Propagations leaving a group.
    pub fn propagations_from<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a GtPropagation> {
        self.propagations.iter().filter(move |p| p.source == group)
    }
}
