//! Std companion to `eog-core`: snapshot and ledger files, bundled JSON
//! schemas, external policies over stdio or HTTP, and the evaluator.

pub mod evaluator;
pub mod files;
pub mod schemas;
pub mod wire;

pub use eog_core as core;
