//! JSON schemas for the files the CLI writes and reads.

pub const AGENT_OUTPUT: &str = include_str!("../schemas/agent_output.schema.json");
pub const GROUND_TRUTH: &str = include_str!("../schemas/ground_truth.schema.json");
pub const CHECKPOINT: &str = include_str!("../schemas/checkpoint.schema.json");
pub const LEDGER_ENTRY: &str = include_str!("../schemas/ledger_entry.schema.json");

/// `(name, schema text)` for every bundled schema.
pub const ALL: [(&str, &str); 4] = [
    ("agent_output", AGENT_OUTPUT),
    ("ground_truth", GROUND_TRUTH),
    ("checkpoint", CHECKPOINT),
    ("ledger_entry", LEDGER_ENTRY),
];
