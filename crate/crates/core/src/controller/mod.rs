//! The investigation controller: an event queue driving policy evaluations,
//! belief broadcasts and damping safeguards over a snapshot.

mod bootstrap;
mod ledger;
mod ranking;
mod report;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entity::EntityId;
use crate::evidence::{
    chunk_packet, filter_events, filter_spec_changes, get_context, is_watchdog, select_window,
    Alert, ContextError, ContextPacket, ContextRequest, EventFilterContext, EvidenceConfig,
    EvidenceError, Message, Snapshot,
};
use crate::explanatory::{Attribution, Belief, ExplanatoryGraph, Label};
use crate::graph::Direction;
use crate::policy::{map_reduce_evaluate, AbductivePolicy, PolicyError, PolicyOutput};
use crate::time::TimeWindow;

pub use bootstrap::{bootstrap, seed_tier};
pub use ledger::{replay_ledger, verify_ledger, LedgerEntry, LedgerError, LedgerSummary};
pub use ranking::{fallback_ranking, FallbackWeights, RankedEntity};
pub use report::{finalize, AlertExplanation, Diagnosis, DiagnosisEntity};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ControllerError {
    #[error("no alerts, events or spec changes to seed the investigation")]
    NoCandidates,
    #[error("explanatory graph has no nodes")]
    EmptyInvestigation,
    #[error("invalid budget configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}

/// Safeguards and sizing knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Maximum policy invocations.
    pub max_hops: u32,
    /// Label flips tolerated before a node is frozen at Defer.
    pub k_thresh: u32,
    /// Maximum evaluations per node.
    pub k_max: u32,
    /// Other evaluations required between two visits of one node.
    pub k_cool: u32,
    /// Packets larger than this are chunked and map-reduced.
    pub packet_budget_bytes: usize,
    #[serde(default = "default_deps_per_page")]
    pub deps_per_page: usize,
    #[serde(default = "default_overlap")]
    pub chunk_overlap: f64,
    #[serde(default)]
    pub evidence: EvidenceConfig,
}

fn default_deps_per_page() -> usize {
    3
}

fn default_overlap() -> f64 {
    0.1
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_hops: 100,
            k_thresh: 3,
            k_max: 5,
            k_cool: 2,
            packet_budget_bytes: 320 * 1024,
            deps_per_page: default_deps_per_page(),
            chunk_overlap: default_overlap(),
            evidence: EvidenceConfig::default(),
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidConfig(m.to_string()));
        if self.max_hops == 0 || self.k_thresh == 0 || self.k_max == 0 {
            return bad("max_hops, k_thresh and k_max must be at least 1");
        }
        if self.packet_budget_bytes < 4096 {
            return bad("packet_budget_bytes must be at least 4096");
        }
        if self.deps_per_page == 0 {
            return bad("deps_per_page must be at least 1");
        }
        if !(0.0..0.5).contains(&self.chunk_overlap) {
            return bad("chunk_overlap must be in [0, 0.5)");
        }
        Ok(())
    }
}

/// Why an entity was queued. Stronger reasons win when activations coalesce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationReason {
    Reactivated,
    Proposed,
    Discovered,
    Seed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum InvestigationEvent {
    Activate {
        entity: EntityId,
        reason: ActivationReason,
    },
    MessageDelivery {
        message: Message,
    },
    BeliefChanged {
        entity: EntityId,
    },
}

impl InvestigationEvent {
    pub fn activate(entity: EntityId, reason: ActivationReason) -> Self {
        Self::Activate { entity, reason }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Frozen,
    MaxVisits,
    /// The activation went back to the end of the queue.
    Cooldown,
    UnknownEntity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// The policy ran for this entity.
    Evaluated(EntityId),
    /// A message was delivered or a belief change was broadcast.
    Routed,
    Skipped(SkipReason),
    QueueEmpty,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Quiescence,
    BudgetExhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRuntimeState {
    pub visits: u32,
    /// Label changes across evaluations; the first assignment counts.
    pub flips: u32,
    /// Evaluation counter value at the node's latest visit.
    pub last_visit_step: u64,
    pub frozen_defer: bool,
}

/// Serializable controller state between two steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub eog_checkpoint_version: u32,
    pub window: TimeWindow,
    pub config: BudgetConfig,
    pub seeds: Vec<EntityId>,
    pub explanatory_graph: ExplanatoryGraph,
    pub node_runtime_states: BTreeMap<EntityId, NodeRuntimeState>,
    pub pending_events: Vec<InvestigationEvent>,
    pub inboxes: BTreeMap<EntityId, BTreeMap<EntityId, Message>>,
    pub ledger: Vec<LedgerEntry>,
    pub budget_remaining: u32,
    /// Policy invocations so far.
    pub step_counter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestigationResult {
    pub window: TimeWindow,
    pub explanatory_graph: ExplanatoryGraph,
    pub frontier: BTreeSet<EntityId>,
    /// Non-empty only when the frontier is empty.
    pub fallback_ranking: Vec<RankedEntity>,
    pub ledger: Vec<LedgerEntry>,
    pub terminated_by: Termination,
    pub seeds: Vec<EntityId>,
    pub policy_invocations: u64,
    pub budget_remaining: u32,
}

/// One investigation over an immutable snapshot.
#[derive(Debug, Clone)]
pub struct Investigation<'s> {
    snapshot: &'s Snapshot,
    window: TimeWindow,
    config: BudgetConfig,
    seeds: Vec<EntityId>,
    es: ExplanatoryGraph,
    nodes: BTreeMap<EntityId, NodeRuntimeState>,
    queue: VecDeque<InvestigationEvent>,
    inboxes: BTreeMap<EntityId, BTreeMap<EntityId, Message>>,
    ledger: Vec<LedgerEntry>,
    budget_remaining: u32,
    evaluations: u64,
}

/// Alerts that explain the incident inside `window`: overlapping and not
/// platform watchdogs.
pub fn incident_alerts(snapshot: &Snapshot, window: &TimeWindow) -> Vec<Alert> {
    snapshot
        .alerts
        .iter()
        .filter(|a| window.overlaps(a.first_seen, a.last_seen) && !is_watchdog(a))
        .cloned()
        .collect()
}

fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl<'s> Investigation<'s> {
    /// Starts from explicit seed events.
    pub fn new(
        snapshot: &'s Snapshot,
        window: TimeWindow,
        config: BudgetConfig,
        seeds: Vec<InvestigationEvent>,
    ) -> Result<Self, ControllerError> {
        config.validate()?;
        let mut inv = Self {
            snapshot,
            window,
            config,
            seeds: Vec::new(),
            es: ExplanatoryGraph::new(),
            nodes: BTreeMap::new(),
            queue: VecDeque::new(),
            inboxes: BTreeMap::new(),
            ledger: Vec::new(),
            budget_remaining: config.max_hops,
            evaluations: 0,
        };
        for ev in seeds {
            if let InvestigationEvent::Activate { entity, .. } = &ev {
                if !inv.seeds.contains(entity) {
                    inv.seeds.push(entity.clone());
                }
            }
            inv.queue.push_back(ev);
        }
        Ok(inv)
    }

    /// Selects the window (unless given), filters evidence and seeds the queue.
    pub fn from_snapshot(
        snapshot: &'s Snapshot,
        config: BudgetConfig,
        window: Option<TimeWindow>,
    ) -> Result<Self, ControllerError> {
        let (window, anchors) = match window {
            Some(w) => (w, incident_alerts(snapshot, &w)),
            None => select_window(&snapshot.alerts, config.evidence.lead_margin_minutes)?,
        };
        let ctx = EventFilterContext::new(&snapshot.topology, window, &anchors);
        let events = filter_events(&snapshot.events, &ctx, config.evidence.max_per_page);
        let changes = filter_spec_changes(
            &snapshot.spec_changes,
            &window,
            config.evidence.pre_incident_margin_minutes,
            config.evidence.max_per_page,
        );
        let seeds = bootstrap(snapshot, &window, &events, &changes)?;
        Self::new(snapshot, window, config, seeds)
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn explanatory_graph(&self) -> &ExplanatoryGraph {
        &self.es
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn pending(&self) -> impl Iterator<Item = &InvestigationEvent> {
        self.queue.iter()
    }

    pub fn node_state(&self, v: &EntityId) -> Option<&NodeRuntimeState> {
        self.nodes.get(v)
    }

    pub fn budget_remaining(&self) -> u32 {
        self.budget_remaining
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            eog_checkpoint_version: CHECKPOINT_VERSION,
            window: self.window,
            config: self.config,
            seeds: self.seeds.clone(),
            explanatory_graph: self.es.clone(),
            node_runtime_states: self.nodes.clone(),
            pending_events: self.queue.iter().cloned().collect(),
            inboxes: self.inboxes.clone(),
            ledger: self.ledger.clone(),
            budget_remaining: self.budget_remaining,
            step_counter: self.evaluations,
        }
    }

    pub fn restore(snapshot: &'s Snapshot, cp: Checkpoint) -> Result<Self, ControllerError> {
        let corrupt = |m: String| Err(ControllerError::CorruptCheckpoint(m));
        if cp.eog_checkpoint_version != CHECKPOINT_VERSION {
            return corrupt(format!(
                "unsupported checkpoint version {}",
                cp.eog_checkpoint_version
            ));
        }
        cp.config
            .validate()
            .map_err(|e| ControllerError::CorruptCheckpoint(format!("{e}")))?;
        if cp.ledger.len() as u64 != cp.step_counter {
            return corrupt(format!(
                "ledger has {} entries but step counter is {}",
                cp.ledger.len(),
                cp.step_counter
            ));
        }
        if u64::from(cp.budget_remaining) + cp.step_counter != u64::from(cp.config.max_hops) {
            return corrupt("budget does not match the number of policy invocations".to_string());
        }
        match replay_ledger(&cp.ledger) {
            Ok(es) if es == cp.explanatory_graph => {}
            Ok(_) => return corrupt("ledger does not reproduce the explanatory graph".to_string()),
            Err(e) => return corrupt(format!("{e}")),
        }
        Ok(Self {
            snapshot,
            window: cp.window,
            config: cp.config,
            seeds: cp.seeds,
            es: cp.explanatory_graph,
            nodes: cp.node_runtime_states,
            queue: cp.pending_events.into_iter().collect(),
            inboxes: cp.inboxes,
            ledger: cp.ledger,
            budget_remaining: cp.budget_remaining,
            evaluations: cp.step_counter,
        })
    }

    fn is_known(&self, v: &EntityId) -> bool {
        self.snapshot.topology.contains(v)
            || self.es.contains_node(v)
            || self
                .es
                .stored_edges()
                .iter()
                .any(|e| &e.source == v || &e.target == v)
    }

    fn cooling(&self, v: &EntityId) -> bool {
        match self.nodes.get(v) {
            Some(st) if st.visits > 0 => {
                self.evaluations - st.last_visit_step < u64::from(self.config.k_cool)
            }
            _ => false,
        }
    }

    fn is_cooldown_blocked(&self, ev: &InvestigationEvent) -> bool {
        match ev {
            InvestigationEvent::Activate { entity, .. } => {
                let st = self.nodes.get(entity);
                let dropped = st.is_some_and(|s| s.frozen_defer || s.visits >= self.config.k_max);
                !dropped && self.cooling(entity)
            }
            _ => false,
        }
    }

    /// Queues an activation unless one is pending, in which case the pending
    /// one keeps its place and takes the stronger reason.
    fn enqueue_activation(&mut self, entity: EntityId, reason: ActivationReason) {
        for ev in self.queue.iter_mut() {
            if let InvestigationEvent::Activate {
                entity: e,
                reason: r,
            } = ev
            {
                if *e == entity {
                    *r = (*r).max(reason);
                    return;
                }
            }
        }
        self.queue
            .push_back(InvestigationEvent::Activate { entity, reason });
    }

    /// Topology neighbors plus entities sharing a causal edge.
    fn broadcast_neighbors(&self, v: &EntityId) -> BTreeSet<EntityId> {
        let mut out: BTreeSet<EntityId> = self
            .snapshot
            .topology
            .neighbors(v, Direction::Both, None)
            .unwrap_or_default()
            .into_iter()
            .collect();
        out.extend(self.es.edge_neighbors(v));
        out.remove(v);
        out
    }

    /// Full neighbor list across all pages, plus the inbox.
    fn assemble_packet(&self, v: &EntityId, visit_index: u32) -> Result<ContextPacket, ContextError> {
        let inbox: Vec<Message> = self
            .inboxes
            .get(v)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default();
        let mut req = ContextRequest::new(v.clone(), self.window);
        req.visit_index = visit_index;
        req.deps_per_page = self.config.deps_per_page;
        req.baseline_minutes = self.config.evidence.baseline_minutes;
        let mut packet = get_context(self.snapshot, &self.es, &req, &inbox)?;
        for page in 2..=packet.total_pages {
            req.page = page;
            let more = get_context(self.snapshot, &self.es, &req, &inbox)?;
            packet.neighbors.extend(more.neighbors);
        }
        packet.total_pages = 1;
        packet.size_bytes = packet.measure();
        Ok(packet)
    }

    fn invoke(
        &self,
        policy: &mut dyn AbductivePolicy,
        packet: &ContextPacket,
    ) -> Result<PolicyOutput, PolicyError> {
        let out = if packet.size_bytes > self.config.packet_budget_bytes {
            let chunks = chunk_packet(
                packet,
                self.config.packet_budget_bytes,
                self.config.chunk_overlap,
            );
            map_reduce_evaluate(&chunks, policy)?
        } else {
            policy.evaluate(packet)?
        };
        out.validate(&packet.entity)?;
        Ok(out)
    }

    /// Processes the event at the front of the queue.
    pub fn step(&mut self, policy: &mut dyn AbductivePolicy) -> StepOutcome {
        if self.queue.is_empty() {
            return StepOutcome::QueueEmpty;
        }
        if self.budget_remaining == 0 {
            return StepOutcome::BudgetExhausted;
        }
        let ev = self.queue.pop_front().expect("non-empty");
        match ev {
            InvestigationEvent::MessageDelivery { message } => {
                self.inboxes
                    .entry(message.to.clone())
                    .or_default()
                    .insert(message.from.clone(), message);
                StepOutcome::Routed
            }
            InvestigationEvent::BeliefChanged { entity } => {
                self.broadcast(&entity);
                StepOutcome::Routed
            }
            InvestigationEvent::Activate { entity, reason } => self.activate(entity, reason, policy),
        }
    }

    fn broadcast(&mut self, v: &EntityId) {
        let Some(belief) = self.es.belief(v).cloned() else {
            return;
        };
        let neighbors = self.broadcast_neighbors(v);
        for n in &neighbors {
            if let Some(m) = Message::new(v.clone(), n.clone(), belief.clone(), self.evaluations) {
                self.queue
                    .push_back(InvestigationEvent::MessageDelivery { message: m });
            }
        }
        for n in neighbors {
            let frozen = self.nodes.get(&n).is_some_and(|s| s.frozen_defer);
            if self.es.contains_node(&n) && !frozen {
                self.enqueue_activation(n, ActivationReason::Reactivated);
            }
        }
    }

    fn activate(
        &mut self,
        v: EntityId,
        reason: ActivationReason,
        policy: &mut dyn AbductivePolicy,
    ) -> StepOutcome {
        let st = self.nodes.get(&v).cloned().unwrap_or_default();
        if st.frozen_defer {
            return StepOutcome::Skipped(SkipReason::Frozen);
        }
        if st.visits >= self.config.k_max {
            return StepOutcome::Skipped(SkipReason::MaxVisits);
        }
        if !self.is_known(&v) {
            return StepOutcome::Skipped(SkipReason::UnknownEntity);
        }
        if self.cooling(&v) {
            let others_ready = self.queue.iter().any(|e| !self.is_cooldown_blocked(e));
            if others_ready {
                self.queue
                    .push_back(InvestigationEvent::Activate { entity: v, reason });
                return StepOutcome::Skipped(SkipReason::Cooldown);
            }
            // Everything left is cooling down; waive the wait to stay live.
        }

        let visit = st.visits + 1;
        let packet = match self.assemble_packet(&v, visit) {
            Ok(p) => p,
            Err(_) => return StepOutcome::Skipped(SkipReason::UnknownEntity),
        };
        let result = self.invoke(policy, &packet);
        self.evaluations += 1;
        self.budget_remaining -= 1;
        let step = self.evaluations;
        let previous = self.es.belief(&v).cloned();
        let previous_label = previous.as_ref().map(|b| b.label);

        let mut state = st;
        state.visits = visit;
        state.last_visit_step = step;

        let (belief, claims, proposals, digest, failure, damped) = match result {
            Ok(out) => {
                let digest = out.digest();
                if previous_label != Some(out.label) {
                    state.flips += 1;
                }
                let damped = state.flips > self.config.k_thresh;
                let (label, summary, claims, proposals) = if damped {
                    state.frozen_defer = true;
                    (
                        Label::Defer,
                        format!("damped after {} label flips: {}", state.flips, out.reasoning),
                        Vec::new(),
                        Vec::new(),
                    )
                } else {
                    (out.label, out.reasoning, out.propagation_claims, out.next_candidates)
                };
                let mut attributed: Vec<Attribution> = claims
                    .iter()
                    .filter(|c| c.target == v)
                    .map(|c| Attribution {
                        entity: c.source.clone(),
                        condition: c.condition.clone(),
                    })
                    .collect();
                attributed.sort();
                let belief = Belief {
                    label,
                    evidence_summary: summary,
                    citations: out.evidence_citations,
                    attributed_to: attributed,
                    updated_at: step,
                };
                (belief, claims, proposals, digest, None, damped)
            }
            Err(e) => {
                let text = format!("{e}");
                if previous_label != Some(Label::Defer) {
                    state.flips += 1;
                }
                let damped = state.flips > self.config.k_thresh;
                state.frozen_defer |= damped;
                let belief = Belief {
                    label: Label::Defer,
                    evidence_summary: format!("policy failure: {text}"),
                    citations: Vec::new(),
                    attributed_to: previous.as_ref().map(|b| b.attributed_to.clone()).unwrap_or_default(),
                    updated_at: step,
                };
                (belief, Vec::new(), Vec::new(), digest_text(&text), Some(text), damped)
            }
        };
        self.nodes.insert(v.clone(), state.clone());

        let entry = LedgerEntry {
            step,
            entity: v.clone(),
            visit,
            previous_label,
            belief: belief.clone(),
            trigger: InvestigationEvent::Activate {
                entity: v.clone(),
                reason,
            },
            policy_output_digest: digest,
            claims: claims.clone(),
            next_candidates: proposals.clone(),
            flips: state.flips,
            damped,
            frozen: state.frozen_defer,
            policy_failure: failure.clone(),
        };
        ledger::apply_entry(&mut self.es, &entry).expect("claims were validated with the output");
        self.ledger.push(entry);

        // Exploration: the other endpoint of every claim.
        for c in &claims {
            let other = if c.source == v { &c.target } else { &c.source };
            if !self.es.contains_node(other) {
                self.enqueue_activation(other.clone(), ActivationReason::Discovered);
            }
        }
        if previous.as_ref().is_none_or(|p| belief.differs_from(p)) {
            self.queue
                .push_back(InvestigationEvent::BeliefChanged { entity: v.clone() });
        }
        for u in proposals {
            if !self.es.contains_node(&u) && u != v {
                self.enqueue_activation(u, ActivationReason::Proposed);
            }
        }
        StepOutcome::Evaluated(v)
    }

    /// Steps until the queue drains or the budget runs out.
    pub fn run(&mut self, policy: &mut dyn AbductivePolicy) -> Termination {
        loop {
            match self.step(policy) {
                StepOutcome::QueueEmpty => return Termination::Quiescence,
                StepOutcome::BudgetExhausted => return Termination::BudgetExhausted,
                _ => {}
            }
        }
    }

    /// Frontier, fallback ranking and the full record.
    pub fn result(&self, terminated_by: Termination) -> InvestigationResult {
        let frontier = self.es.compute_frontier();
        let fallback = if frontier.is_empty() {
            fallback_ranking(&self.es, self.snapshot, &self.window, &FallbackWeights::default())
                .unwrap_or_default()
        } else {
            Vec::new()
        };
        InvestigationResult {
            window: self.window,
            explanatory_graph: self.es.clone(),
            frontier,
            fallback_ranking: fallback,
            ledger: self.ledger.clone(),
            terminated_by,
            seeds: self.seeds.clone(),
            policy_invocations: self.evaluations,
            budget_remaining: self.budget_remaining,
        }
    }
}

/// Bootstraps, runs to termination and collects the result.
pub fn run(
    snapshot: &Snapshot,
    window: Option<TimeWindow>,
    policy: &mut dyn AbductivePolicy,
    config: BudgetConfig,
) -> Result<InvestigationResult, ControllerError> {
    let mut inv = Investigation::from_snapshot(snapshot, config, window)?;
    let t = inv.run(policy);
    Ok(inv.result(t))
}
