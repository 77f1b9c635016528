//! Synthetic incident scenarios with ground truth.
//!
//! Every scenario is built around a fault chain: a path of call edges along
//! which the fault travels. Call edges run caller to callee. Errors surface
//! at callers, so the alert fires at the top of the chain while the injected
//! fault sits at the bottom, except for traffic surges where the load source
//! is the top of the chain and the alert fires one hop below it.

mod truth;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entity::EntityId;
use crate::evidence::{
    metric_names, Alert, EventType, K8sEvent, LogChunk, LogLine, MetricPoint, MetricSeries,
    Severity, Signal, Snapshot, SpecChange,
};
use crate::graph::{EdgeKind, OperationalGraph, TopologyEdge};
use crate::time::{minutes, Timestamp};

pub use truth::{GroundTruth, GtGroup, GtPropagation};

pub const DEFAULT_NAMESPACE: &str = "otel-demo";

/// Incident onset of every generated scenario.
pub const INCIDENT_START: &str = "2025-06-01T10:00:00Z";

const SERVICE_NAMES: &[&str] = &[
    "frontend",
    "checkout",
    "cart",
    "payment",
    "currency",
    "shipping",
    "email",
    "recommendation",
    "product-catalog",
    "quote",
    "ad",
    "accounting",
    "fraud-detection",
    "image-provider",
    "kafka",
    "valkey",
];

const FLAGS: &[&str] = &[
    "adServiceFailure",
    "cartServiceFailure",
    "paymentServiceFailure",
    "productCatalogFailure",
    "recommendationCacheFailure",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    ConfigChange,
    ResourceExhaustion,
    TrafficSurge,
    CascadingFailure,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [
        FaultKind::ConfigChange,
        FaultKind::ResourceExhaustion,
        FaultKind::TrafficSurge,
        FaultKind::CascadingFailure,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_services: usize,
    /// Fraction of call edges left out of the topology.
    pub hidden_edge_fraction: f64,
    pub fault: FaultKind,
    /// Hops between the injected fault and the furthest affected service.
    pub cascade_depth: usize,
    /// Irrelevant events and log lines per service.
    pub noise_level: f64,
    #[serde(default = "default_namespace")]
    pub namespace: String,
}

fn default_namespace() -> String {
    DEFAULT_NAMESPACE.to_string()
}

impl ScenarioSpec {
    pub fn new(seed: u64, fault: FaultKind) -> Self {
        Self {
            seed,
            n_services: 6,
            hidden_edge_fraction: 0.25,
            fault,
            cascade_depth: 3,
            noise_level: 1.0,
            namespace: default_namespace(),
        }
    }

    fn chain_len(&self) -> usize {
        (self.cascade_depth + 1).min(self.n_services)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.n_services < 2 {
            return bad(format!("n_services must be at least 2, got {}", self.n_services));
        }
        if !(0.0..1.0).contains(&self.hidden_edge_fraction) {
            return bad("hidden_edge_fraction must be in [0, 1)".to_string());
        }
        if self.cascade_depth == 0 {
            return bad("cascade_depth must be at least 1".to_string());
        }
        if self.noise_level.is_nan() || self.noise_level < 0.0 {
            return bad("noise_level must be non-negative".to_string());
        }
        if self.fault == FaultKind::TrafficSurge && self.chain_len() < 3 {
            return bad("a traffic surge needs cascade_depth >= 2 and n_services >= 3".to_string());
        }
        if EntityId::new(&self.namespace, "Deployment", "x").is_err() {
            return bad(format!("invalid namespace `{}`", self.namespace));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
}

/// A generated incident.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub spec: ScenarioSpec,
    pub snapshot: Snapshot,
    pub ground_truth: GroundTruth,
    /// Call edges omitted from the topology.
    pub hidden_edges: Vec<TopologyEdge>,
    /// Services along the fault chain, top (caller side) first.
    pub chain: Vec<EntityId>,
    /// The service carrying the injected fault.
    pub root: EntityId,
}

impl Scenario {
    /// Topology edges plus hidden edges.
    pub fn full_graph(&self) -> OperationalGraph {
        let edges = self
            .snapshot
            .topology
            .edges()
            .iter()
            .cloned()
            .chain(self.hidden_edges.iter().cloned());
        OperationalGraph::new(self.snapshot.topology.nodes().iter().cloned(), edges)
            .expect("hidden edges connect registered services")
    }

}

fn t0() -> Timestamp {
    INCIDENT_START.parse().expect("valid constant")
}

fn at(min: i64) -> Timestamp {
    t0() + minutes(min)
}

fn service_name(i: usize) -> String {
    SERVICE_NAMES
        .get(i)
        .map_or_else(|| format!("service-{i:02}"), |s| s.to_string())
}

fn line(at: Timestamp, level: &str, text: String) -> LogLine {
    LogLine {
        at,
        level: level.to_string(),
        text,
    }
}

struct Builder {
    ns: String,
    services: Vec<EntityId>,
    call_edges: Vec<TopologyEdge>,
    hidden: BTreeSet<usize>,
    alerts: Vec<Alert>,
    events: Vec<K8sEvent>,
    changes: Vec<SpecChange>,
    metrics: Vec<MetricSeries>,
    logs: Vec<(EntityId, LogLine)>,
}

/// Per-minute points from 40 minutes before onset to 20 after.
fn series(f: impl Fn(i64) -> f64) -> Vec<MetricPoint> {
    (-40..=20)
        .map(|m| MetricPoint {
            at: at(m),
            value: f(m),
        })
        .collect()
}

impl Builder {
    fn id(&self, name: &str) -> EntityId {
        EntityId::new(&self.ns, "Deployment", name).expect("generated names are valid")
    }

    fn log(&mut self, e: &EntityId, at: Timestamp, level: &str, text: String) {
        self.logs.push((e.clone(), line(at, level, text)));
    }

    fn alert(&mut self, e: &EntityId) {
        self.alerts.push(Alert {
            name: "HighErrorRate".to_string(),
            entity: e.clone(),
            severity: Severity::Critical,
            signal: Signal::Errors,
            first_seen: at(0),
            last_seen: at(20),
        });
    }

    fn event(&mut self, e: &EntityId, reason: &str, at_min: i64, message: &str) {
        self.events.push(K8sEvent {
            entity: e.clone(),
            reason: reason.to_string(),
            event_type: EventType::Warning,
            message: message.to_string(),
            at: at(at_min),
        });
    }

    /// `caller` fails when calling `callee`, from `from_min` onward.
    fn call_errors(&mut self, caller: &EntityId, callee: &EntityId, from_min: i64, what: &str) {
        for k in 0..3 {
            self.log(
                caller,
                at(from_min + 2 * k),
                "ERROR",
                format!("{what} calling {callee}: request failed"),
            );
        }
    }

    fn finish(mut self) -> (Snapshot, Vec<TopologyEdge>) {
        let mut visible = Vec::new();
        let mut hidden = Vec::new();
        for (i, e) in self.call_edges.iter().enumerate() {
            if self.hidden.contains(&i) {
                hidden.push(e.clone());
            } else {
                visible.push(e.clone());
            }
        }
        // Every hidden call leaves a trace at its caller.
        for e in &hidden {
            let text = format!("GET /api calling {} 200 OK", e.dst);
            self.logs.push((e.src.clone(), line(at(-20), "INFO", text)));
        }
        let topology = OperationalGraph::new(self.services.iter().cloned(), visible)
            .expect("edges connect generated services");
        let mut logs: Vec<LogChunk> = Vec::new();
        for s in &self.services {
            let mut lines: Vec<LogLine> = self
                .logs
                .iter()
                .filter(|(e, _)| e == s)
                .map(|(_, l)| l.clone())
                .collect();
            if lines.is_empty() {
                continue;
            }
            lines.sort_by(|a, b| a.at.cmp(&b.at).then_with(|| a.text.cmp(&b.text)));
            logs.push(LogChunk {
                entity: s.clone(),
                lines,
            });
        }
        self.events.sort_by(|a, b| a.at.cmp(&b.at).then_with(|| a.entity.cmp(&b.entity)));
        let snapshot = Snapshot {
            topology,
            alerts: self.alerts,
            events: self.events,
            spec_changes: self.changes,
            metrics: self.metrics,
            logs,
        };
        (snapshot, hidden)
    }
}

/// Generates a scenario. Identical specs give identical scenarios.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_services;

    // Service names drawn from the pool in a seed-dependent order.
    let mut order: Vec<usize> = (0..n.max(SERVICE_NAMES.len())).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let names: Vec<String> = order.into_iter().take(n).map(service_name).collect();
    let mut b = Builder {
        ns: spec.namespace.clone(),
        services: Vec::new(),
        call_edges: Vec::new(),
        hidden: BTreeSet::new(),
        alerts: Vec::new(),
        events: Vec::new(),
        changes: Vec::new(),
        metrics: Vec::new(),
        logs: Vec::new(),
    };
    b.services = names.iter().map(|s| b.id(s)).collect();

    // The first `chain_len` services form the fault chain; the rest hang off
    // earlier services. Edges only go from lower to higher index.
    let len = spec.chain_len();
    let chain: Vec<EntityId> = b.services[..len].to_vec();
    for i in 0..len - 1 {
        b.call_edges.push(TopologyEdge {
            src: chain[i].clone(),
            dst: chain[i + 1].clone(),
            kind: EdgeKind::Dependency,
        });
    }
    for j in len..n {
        let parent = rng.random_range(0..j);
        b.call_edges.push(TopologyEdge {
            src: b.services[parent].clone(),
            dst: b.services[j].clone(),
            kind: EdgeKind::Dependency,
        });
        if j >= 2 && rng.random_bool(0.3) {
            let extra = rng.random_range(0..j);
            if extra != parent {
                b.call_edges.push(TopologyEdge {
                    src: b.services[extra].clone(),
                    dst: b.services[j].clone(),
                    kind: EdgeKind::Dependency,
                });
            }
        }
    }
    let n_hidden = (spec.hidden_edge_fraction * b.call_edges.len() as f64) as usize;
    while b.hidden.len() < n_hidden {
        b.hidden.insert(rng.random_range(0..b.call_edges.len()));
    }

    // Flat request rates everywhere.
    for s in &b.services.clone() {
        let base = f64::from(rng.random_range(40u32..200));
        b.metrics.push(MetricSeries {
            entity: s.clone(),
            metric: metric_names::REQUEST_RATE.to_string(),
            unit: "rps".to_string(),
            source: None,
            staged: false,
            points: series(|_| base),
        });
    }

    let truth = inject(&mut b, spec, &chain, &mut rng);

    // Noise: routine events and info logs on random services.
    let noise = (spec.noise_level * n as f64) as usize;
    for k in 0..noise {
        let s = b.services[rng.random_range(0..n)].clone();
        let m = rng.random_range(-30i64..20);
        if k % 2 == 0 {
            let reason = ["Scheduled", "Pulled", "Created", "Started"][rng.random_range(0..4)];
            b.events.push(K8sEvent {
                entity: s,
                reason: reason.to_string(),
                event_type: EventType::Normal,
                message: format!("{reason} routine"),
                at: at(m),
            });
        } else {
            b.log(&s, at(m), "INFO", "GET /health 200".to_string());
        }
    }

    let (snapshot, hidden_edges) = b.finish();
    Ok(Scenario {
        name: format!("{}-seed{}", fault_slug(spec.fault), spec.seed),
        spec: spec.clone(),
        snapshot,
        ground_truth: truth,
        hidden_edges,
        root: root_of(spec.fault, &chain).clone(),
        chain,
    })
}

fn root_of(fault: FaultKind, chain: &[EntityId]) -> &EntityId {
    match fault {
        FaultKind::TrafficSurge => &chain[0],
        _ => &chain[chain.len() - 1],
    }
}

fn fault_slug(f: FaultKind) -> &'static str {
    match f {
        FaultKind::ConfigChange => "config-change",
        FaultKind::ResourceExhaustion => "resource-exhaustion",
        FaultKind::TrafficSurge => "traffic-surge",
        FaultKind::CascadingFailure => "cascading-failure",
    }
}

/// Writes fault evidence and returns the ground truth.
fn inject(b: &mut Builder, spec: &ScenarioSpec, chain: &[EntityId], rng: &mut ChaCha8Rng) -> GroundTruth {
    let len = chain.len();
    match spec.fault {
        FaultKind::TrafficSurge => {
            let source = &chain[0];
            b.log(
                source,
                at(-4),
                "INFO",
                "flash sale started: traffic spike on storefront".to_string(),
            );
            for i in 1..len {
                // +20% at the first hop, five more points per further hop.
                let factor = 1.15 + 0.05 * i as f64;
                b.metrics.push(MetricSeries {
                    entity: chain[i].clone(),
                    metric: metric_names::INBOUND_RATE_BY_SOURCE.to_string(),
                    unit: "rps".to_string(),
                    source: Some(chain[i - 1].clone()),
                    staged: i == len - 1,
                    points: series(|m| if m < -5 { 100.0 } else { 100.0 * factor }),
                });
            }
            let sink = &chain[len - 1];
            b.log(sink, at(-2), "ERROR", "java.lang.OutOfMemoryError: Java heap space".to_string());
            for i in 1..len - 1 {
                let what = if i == 1 { "HTTP 500" } else { "timeout" };
                b.call_errors(&chain[i].clone(), &chain[i + 1].clone(), -1, what);
            }
            b.alert(&chain[1].clone());
            let cond = "flash sale traffic spike overloads downstream services".to_string();
            GroundTruth::for_chain(
                &spec.namespace,
                chain,
                0,
                &cond,
                &["flash sale", "traffic"],
                &["traffic", "load"],
            )
        }
        FaultKind::ConfigChange => {
            let root = &chain[len - 1];
            let flag = FLAGS[rng.random_range(0..FLAGS.len())];
            let summary = format!("featureflag {flag} enabled in configmap flagd-config");
            b.changes.push(SpecChange {
                entity: root.clone(),
                at: at(-3),
                diff_summary: summary.clone(),
                fields_changed: alloc::vec!["spec.template.spec.containers[0].env".to_string()],
            });
            b.log(
                root,
                at(-2),
                "ERROR",
                format!("feature flag {flag} is on: rejecting requests"),
            );
            add_caller_errors(b, chain);
            b.alert(&chain[0].clone());
            GroundTruth::for_chain(
                &spec.namespace,
                chain,
                len - 1,
                &summary,
                &[flag, "enabled"],
                &["configmap", "featureflag", "config"],
            )
        }
        FaultKind::ResourceExhaustion => {
            let root = &chain[len - 1];
            b.event(root, "OOMKilled", -2, "container exceeded its memory limit");
            b.metrics.push(MetricSeries {
                entity: root.clone(),
                metric: metric_names::MEMORY.to_string(),
                unit: "MiB".to_string(),
                source: None,
                staged: false,
                points: series(|m| if m < -5 { 200.0 } else { 200.0 + 30.0 * (m + 6) as f64 }),
            });
            b.log(root, at(-2), "ERROR", "java.lang.OutOfMemoryError: Java heap space".to_string());
            add_caller_errors(b, chain);
            b.alert(&chain[0].clone());
            GroundTruth::for_chain(
                &spec.namespace,
                chain,
                len - 1,
                "memory leak exhausts the container memory limit",
                &["memory"],
                &["memory", "oom"],
            )
        }
        FaultKind::CascadingFailure => {
            let root = &chain[len - 1];
            b.event(root, "Evicted", -3, "the node was low on resource: ephemeral-storage");
            b.event(root, "CrashLoopBackOff", -2, "back-off restarting failed container");
            b.log(
                root,
                at(-2),
                "ERROR",
                "back-off restarting failed container after eviction".to_string(),
            );
            add_caller_errors(b, chain);
            b.alert(&chain[0].clone());
            GroundTruth::for_chain(
                &spec.namespace,
                chain,
                len - 1,
                "pod evicted and stuck in crashloopbackoff",
                &["evicted"],
                &["crashloopbackoff", "evicted", "restart"],
            )
        }
    }
}

/// Each caller up the chain logs errors calling the next service down.
fn add_caller_errors(b: &mut Builder, chain: &[EntityId]) {
    let len = chain.len();
    for i in (0..len - 1).rev() {
        let depth = (len - 1 - i) as i64;
        b.call_errors(&chain[i].clone(), &chain[i + 1].clone(), -2 + depth, "HTTP 503");
    }
}

/// The four-service flash-sale incident: frontend, gateway, processor and
/// database in a call chain, with the gateway-to-processor call missing from
/// the topology and the alert on the gateway.
pub fn flash_sale() -> Scenario {
    let spec = ScenarioSpec {
        seed: 0,
        n_services: 4,
        hidden_edge_fraction: 0.0,
        fault: FaultKind::TrafficSurge,
        cascade_depth: 3,
        noise_level: 0.0,
        namespace: default_namespace(),
    };
    let names = ["frontend", "gateway", "processor", "database"];
    let mut b = Builder {
        ns: spec.namespace.clone(),
        services: Vec::new(),
        call_edges: Vec::new(),
        hidden: BTreeSet::new(),
        alerts: Vec::new(),
        events: Vec::new(),
        changes: Vec::new(),
        metrics: Vec::new(),
        logs: Vec::new(),
    };
    b.services = names.iter().map(|s| b.id(s)).collect();
    let chain = b.services.clone();
    for i in 0..3 {
        b.call_edges.push(TopologyEdge {
            src: chain[i].clone(),
            dst: chain[i + 1].clone(),
            kind: EdgeKind::Dependency,
        });
    }
    b.hidden.insert(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = inject(&mut b, &spec, &chain, &mut rng);
    let (snapshot, hidden_edges) = b.finish();
    Scenario {
        name: "flash-sale".to_string(),
        spec,
        snapshot,
        ground_truth: truth,
        hidden_edges,
        root: chain[0].clone(),
        chain,
    }
}

/// The spec used for the `index`-th scenario of a suite.
pub fn suite_spec(index: usize, base_seed: u64) -> ScenarioSpec {
    let seed = base_seed + index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let fault = FaultKind::ALL[index % FaultKind::ALL.len()];
    ScenarioSpec {
        seed,
        n_services: rng.random_range(4..=10),
        hidden_edge_fraction: 0.25,
        fault,
        cascade_depth: rng.random_range(2..=3),
        noise_level: 1.0,
        namespace: default_namespace(),
    }
}

/// `n` scenarios cycling through every fault kind, seeds `base_seed..base_seed+n`.
pub fn scenario_suite(n: usize, base_seed: u64) -> Vec<Scenario> {
    (0..n)
        .map(|i| generate(&suite_spec(i, base_seed)).expect("suite specs are valid"))
        .collect()
}
