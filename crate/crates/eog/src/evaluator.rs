//! Scores diagnoses against ground truth.
//!
//! A predicted contributing factor matches a ground-truth group when kind
//! and namespace are equal and the name fully matches one of the group's
//! regex filters. Groups that share an alias list with a root-cause group
//! are credited as that root cause; recall counts each alias class once.

use std::collections::BTreeMap;

use eog_core::controller::Diagnosis;
use eog_core::entity::parse_entity_id;
use eog_core::metrics::{aggregate_success, mean, AggregateError};
use eog_core::sim::GroundTruth;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("group `{group}`: bad regex `{pattern}`: {err}")]
    BadRegex {
        group: String,
        pattern: String,
        err: String,
    },
    #[error("alias references unknown group `{0}`")]
    UnknownAliasGroup(String),
    #[error("propagation references unknown group `{0}`")]
    UnknownPropagationGroup(String),
    #[error("ground truth has no root-cause group")]
    NoRootCause,
    #[error("diagnosis entity `{0}` is not a namespace/Kind/name id")]
    BadEntity(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub predicted: String,
    pub matched_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub reasoning: f64,
    pub per_entity_matches: Vec<EntityMatch>,
}

/// Ground truth with compiled filters and alias classes.
#[derive(Debug)]
pub struct CompiledTruth<'g> {
    gt: &'g GroundTruth,
    filters: Vec<Vec<Regex>>,
    /// Alias class per group index.
    class: Vec<usize>,
    /// Classes holding at least one root-cause group.
    root_classes: Vec<usize>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut x = x;
    while parent[x] != r {
        let next = parent[x];
        parent[x] = r;
        x = next;
    }
    r
}

impl<'g> CompiledTruth<'g> {
    pub fn new(gt: &'g GroundTruth) -> Result<Self, EvalError> {
        let index: BTreeMap<&str, usize> = gt
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.id.as_str(), i))
            .collect();
        let mut filters = Vec::with_capacity(gt.groups.len());
        for g in &gt.groups {
            let mut compiled = Vec::new();
            for pattern in &g.filter {
                let re = Regex::new(&format!("^(?:{pattern})$")).map_err(|e| EvalError::BadRegex {
                    group: g.id.clone(),
                    pattern: pattern.clone(),
                    err: e.to_string(),
                })?;
                compiled.push(re);
            }
            filters.push(compiled);
        }
        let mut parent: Vec<usize> = (0..gt.groups.len()).collect();
        for alias in &gt.aliases {
            let mut first = None;
            for id in alias {
                let &i = index
                    .get(id.as_str())
                    .ok_or_else(|| EvalError::UnknownAliasGroup(id.clone()))?;
                match first {
                    None => first = Some(i),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, i));
                        parent[b] = a;
                    }
                }
            }
        }
        for p in &gt.propagations {
            for id in [&p.source, &p.target] {
                if !index.contains_key(id.as_str()) {
                    return Err(EvalError::UnknownPropagationGroup(id.clone()));
                }
            }
        }
        let class: Vec<usize> = (0..gt.groups.len()).map(|i| find(&mut parent, i)).collect();
        let mut root_classes: Vec<usize> = gt
            .groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.root_cause)
            .map(|(i, _)| class[i])
            .collect();
        root_classes.sort_unstable();
        root_classes.dedup();
        if root_classes.is_empty() {
            return Err(EvalError::NoRootCause);
        }
        Ok(Self {
            gt,
            filters,
            class,
            root_classes,
        })
    }

    /// First root-class group matching `name`, in ground-truth order.
    fn matching_root_group(&self, name: &str) -> Result<Option<usize>, EvalError> {
        let id = parse_entity_id(name).map_err(|_| EvalError::BadEntity(name.to_string()))?;
        Ok(self.gt.groups.iter().enumerate().position(|(i, g)| {
            g.kind == id.kind()
                && g.namespace == id.namespace()
                && self.is_root_class(self.class[i])
                && self.filters[i].iter().any(|re| re.is_match(id.name()))
        }))
    }

    fn is_root_class(&self, class: usize) -> bool {
        self.root_classes.binary_search(&class).is_ok()
    }

    /// Entity scores and reasoning score for one diagnosis.
    pub fn score(&self, diag: &Diagnosis) -> Result<RunScores, EvalError> {
        let mut matches = Vec::new();
        let mut correct = 0;
        // First prediction credited to each root class, for reasoning.
        let mut credited: BTreeMap<usize, &str> = BTreeMap::new();
        for e in diag.entities.iter().filter(|e| e.contributing_factor) {
            let group = self.matching_root_group(&e.name)?;
            if let Some(g) = group {
                correct += 1;
                credited.entry(self.class[g]).or_insert(&e.reasoning);
            }
            matches.push(EntityMatch {
                predicted: e.name.clone(),
                matched_group: group.map(|g| self.gt.groups[g].id.clone()),
            });
        }
        let predicted = matches.len();
        let precision = if predicted == 0 {
            0.0
        } else {
            correct as f64 / predicted as f64
        };
        let recall = credited.len() as f64 / self.root_classes.len() as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let reasoning = if credited.is_empty() {
            0.0
        } else {
            let scores: Vec<f64> = credited
                .iter()
                .map(|(&class, text)| self.reasoning_for_class(class, text))
                .collect();
            mean(&scores)
        };
        Ok(RunScores {
            precision,
            recall,
            f1,
            reasoning,
            per_entity_matches: matches,
        })
    }

    /// Best rubric score over the propagations leaving the class.
    fn reasoning_for_class(&self, class: usize, reasoning: &str) -> f64 {
        self.gt
            .propagations
            .iter()
            .filter(|p| {
                self.gt
                    .groups
                    .iter()
                    .position(|g| g.id == p.source)
                    .is_some_and(|i| self.class[i] == class)
            })
            .map(|p| {
                let keywords = if p.keywords.is_empty() {
                    condition_words(&p.condition)
                } else {
                    p.keywords.clone()
                };
                reasoning_score(reasoning, &keywords, &p.resource_terms)
            })
            .fold(0.0, f64::max)
    }
}

fn condition_words(condition: &str) -> Vec<String> {
    condition
        .split(|c: char| !c.is_alphanumeric() && c != '-' && c != '_')
        .filter(|w| w.len() >= 4)
        .map(str::to_lowercase)
        .collect()
}

/// 1.0 when every keyword appears, 0.5 when only a resource term does,
/// 0.0 otherwise. Case-insensitive substring matching.
pub fn reasoning_score(reasoning: &str, keywords: &[String], resource_terms: &[String]) -> f64 {
    let text = reasoning.to_lowercase();
    let has = |k: &String| text.contains(&k.to_lowercase());
    if !keywords.is_empty() && keywords.iter().all(has) {
        1.0
    } else if resource_terms.iter().any(has) {
        0.5
    } else {
        0.0
    }
}

/// Scores one diagnosis against ground truth.
pub fn score_run(diag: &Diagnosis, gt: &GroundTruth) -> Result<RunScores, EvalError> {
    CompiledTruth::new(gt)?.score(diag)
}

/// Which runs count as successes for Pass@k / Majority@k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", content = "min", rename_all = "snake_case")]
pub enum SuccessPredicate {
    Recall(f64),
    F1(f64),
}

impl Default for SuccessPredicate {
    fn default() -> Self {
        SuccessPredicate::Recall(1.0)
    }
}

impl SuccessPredicate {
    pub fn holds(&self, r: &RunScores) -> bool {
        const EPS: f64 = 1e-9;
        match *self {
            SuccessPredicate::Recall(min) => r.recall + EPS >= min,
            SuccessPredicate::F1(min) => r.f1 + EPS >= min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub k: usize,
    pub scenarios: usize,
    pub pass_at_k: f64,
    pub majority_at_k: f64,
    pub reliability_gap: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub mean_reasoning: f64,
}

/// Aggregates `k` runs per scenario.
pub fn aggregate(
    scenarios: &[Vec<RunScores>],
    predicate: SuccessPredicate,
) -> Result<AggregateScores, EvalError> {
    let success: Vec<Vec<bool>> = scenarios
        .iter()
        .map(|runs| runs.iter().map(|r| predicate.holds(r)).collect())
        .collect();
    let agg = aggregate_success(&success)?;
    let all: Vec<&RunScores> = scenarios.iter().flatten().collect();
    let field = |f: fn(&RunScores) -> f64| mean(&all.iter().map(|r| f(r)).collect::<Vec<_>>());
    Ok(AggregateScores {
        k: agg.k,
        scenarios: agg.scenarios,
        pass_at_k: agg.pass_at_k,
        majority_at_k: agg.majority_at_k,
        reliability_gap: agg.gap,
        mean_precision: field(|r| r.precision),
        mean_recall: field(|r| r.recall),
        mean_f1: field(|r| r.f1),
        mean_reasoning: field(|r| r.reasoning),
    })
}
