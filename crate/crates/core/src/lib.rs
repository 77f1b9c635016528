//! Explanations over Graphs: a deterministic root-cause investigation engine.
//!
//! The crate is `no_std` (with `alloc`) and contains every piece of the engine
//! that does not touch the filesystem, processes, or the network:
//!
//! - [`entity`] and [`graph`]: entity identity and the operational topology.
//! - [`explanatory`]: beliefs, causal edges, reachability and the root-cause
//!   frontier.
//! - [`evidence`]: observability snapshots, window selection, event and spec
//!   change filtering, context packets and chunking.
//! - [`policy`]: the abductive policy interface with a rule-based oracle, an
//!   adversarial policy and map-reduce merging over chunked packets.
//! - [`controller`]: the event-queue controller, ledger, damping safeguards,
//!   checkpoints, fallback ranking and report finalization.
//! - [`sim`]: synthetic incident scenarios with ground truth.
//! - [`metrics`]: precision/recall/F1 and Pass@k / Majority@k aggregation.
//!
//! File formats, the CLI, the external-policy transports and regex-based
//! ground-truth matching live in the companion `eog` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod controller;
pub mod entity;
pub mod evidence;
pub mod explanatory;
pub mod graph;
pub mod metrics;
pub mod policy;
pub mod sim;
pub mod time;

pub use controller::{
    BudgetConfig, Checkpoint, Investigation, InvestigationEvent, InvestigationResult, LedgerEntry,
    Termination,
};
pub use entity::EntityId;
pub use evidence::{ContextPacket, Snapshot};
pub use explanatory::{Belief, CausalEdge, ExplanatoryGraph, Label};
pub use graph::{EdgeKind, OperationalGraph};
pub use policy::{AbductivePolicy, PolicyOutput};
pub use time::{TimeWindow, Timestamp};
