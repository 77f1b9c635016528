use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eog::evaluator::{aggregate, score_run, RunScores, SuccessPredicate};
use eog::files::{self, FileError};
use eog::wire::{ExternalPolicy, HttpTransport, StdioTransport};
use eog_core::controller::{
    finalize, verify_ledger, BudgetConfig, ControllerError, Diagnosis, Investigation, LedgerEntry,
    LedgerError, Termination,
};
use eog_core::explanatory::Belief;
use eog_core::policy::{AbductivePolicy, AdversarialPolicy, OracleConfig, OraclePolicy};
use eog_core::sim::{self, FaultKind, ScenarioSpec};
use eog_core::{EntityId, TimeWindow, Timestamp};
use serde::{Deserialize, Serialize};
use serde_json::json;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_POLICY: u8 = 4;

/// Root-cause investigation over dependency graphs.
#[derive(Debug, Parser)]
#[command(name = "eog", version)]
struct Cli {
    /// TOML file with default values for investigate flags
    #[arg(long, global = true, env = "EOG_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic incident snapshots with ground truth
    Sim(SimArgs),
    /// Run an investigation over a snapshot directory
    Investigate(InvestigateArgs),
    /// Score diagnoses against ground truth
    Eval(EvalArgs),
    /// Print and verify a ledger
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    FlashSale,
    ConfigChange,
    ResourceExhaustion,
    TrafficSurge,
    CascadingFailure,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Fault to inject (flash-sale is the canned four-service incident)
    #[arg(long, value_enum, env = "EOG_FAULT", default_value = "flash-sale")]
    fault: FaultArg,
    /// Generator seed
    #[arg(long, env = "EOG_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of services
    #[arg(long, default_value_t = 6)]
    services: usize,
    /// Fraction of call edges left out of the topology
    #[arg(long, default_value_t = 0.25)]
    hidden_fraction: f64,
    /// Hops between the fault and the furthest affected service
    #[arg(long, default_value_t = 3)]
    cascade_depth: usize,
    /// Irrelevant events and log lines per service
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Kubernetes namespace of generated entities
    #[arg(long, default_value = sim::DEFAULT_NAMESPACE)]
    namespace: String,
    /// Generate this many scenarios cycling through all faults
    #[arg(long)]
    suite: Option<usize>,
    /// First seed of a suite
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Output directory
    #[arg(long, env = "EOG_OUT")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PolicyArg {
    Oracle,
    Adversarial,
    External,
}

#[derive(Debug, Args)]
struct InvestigateArgs {
    /// Snapshot directory
    #[arg(long, env = "EOG_SNAPSHOT")]
    snapshot: Option<PathBuf>,
    /// Policy answering evaluations [default: oracle]
    #[arg(long, value_enum, env = "EOG_POLICY")]
    policy: Option<PolicyArg>,
    /// External policy: http(s) URL, or a command speaking JSON lines on stdio
    #[arg(long, env = "EOG_ENDPOINT")]
    endpoint: Option<String>,
    /// Maximum policy invocations [default: 100]
    #[arg(long, env = "EOG_BUDGET")]
    budget: Option<u32>,
    /// Label flips tolerated before a node is frozen [default: 3]
    #[arg(long, env = "EOG_K_THRESH")]
    k_thresh: Option<u32>,
    /// Maximum evaluations per node [default: 5]
    #[arg(long, env = "EOG_K_MAX")]
    k_max: Option<u32>,
    /// Other evaluations required between visits of a node [default: 2]
    #[arg(long, env = "EOG_K_COOL")]
    k_cool: Option<u32>,
    /// Window start (RFC3339); requires --window-end
    #[arg(long, env = "EOG_WINDOW_START", value_parser = parse_timestamp)]
    window_start: Option<Timestamp>,
    /// Window end (RFC3339); requires --window-start
    #[arg(long, env = "EOG_WINDOW_END", value_parser = parse_timestamp)]
    window_end: Option<Timestamp>,
    /// Run seed, recorded in result.json
    #[arg(long, env = "EOG_SEED")]
    seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long, env = "EOG_OUT")]
    out: Option<PathBuf>,
    /// External policy timeout in seconds [default: 30]
    #[arg(long, env = "EOG_TIMEOUT_SECS")]
    timeout_secs: Option<u64>,
    /// Also write the final controller state to this file
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint instead of bootstrapping
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground truth file
    #[arg(long)]
    gt: PathBuf,
    /// agent_output.json of each run
    #[arg(long, num_args = 1.., required = true)]
    outputs: Vec<PathBuf>,
    /// Expected number of runs (defaults to the number of outputs)
    #[arg(long)]
    k: Option<usize>,
    /// Count a run as successful when F1 reaches this value instead of full recall
    #[arg(long)]
    success_f1: Option<f64>,
    /// Where to write scores.json
    #[arg(long, default_value = "scores.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// ledger.jsonl to replay
    ledger: PathBuf,
    /// Flip threshold used by the run
    #[arg(long, default_value_t = 3)]
    k_thresh: u32,
}

fn parse_timestamp(s: &str) -> Result<Timestamp, String> {
    s.parse::<Timestamp>().map_err(|e| format!("not an RFC3339 timestamp: {e}"))
}

/// Values read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    snapshot: Option<PathBuf>,
    policy: Option<PolicyArg>,
    endpoint: Option<String>,
    budget: Option<u32>,
    k_thresh: Option<u32>,
    k_max: Option<u32>,
    k_cool: Option<u32>,
    window_start: Option<Timestamp>,
    window_end: Option<Timestamp>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    timeout_secs: Option<u64>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: impl Display) -> Self {
        Self {
            code,
            kind,
            message: message.to_string(),
        }
    }

    fn usage(message: impl Display) -> Self {
        Self::new(EXIT_USAGE, "usage", message)
    }

    fn data(message: impl Display) -> Self {
        Self::new(EXIT_DATA, "data", message)
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::data(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sim(a) => cmd_sim(a),
        Command::Investigate(a) => cmd_investigate(a, cli.config.as_deref()),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(f.code)
        }
    }
}

fn cmd_sim(a: SimArgs) -> Result<(), Failure> {
    if let Some(n) = a.suite {
        if n == 0 {
            return Err(Failure::usage("--suite must be at least 1"));
        }
        for s in sim::scenario_suite(n, a.base_seed) {
            let dir = a.out.join(&s.name);
            files::write_scenario(&dir, &s)?;
            println!("{} {}", s.name, files::manifest_hash(&dir)?);
        }
    } else {
        let scenario = match a.fault {
            FaultArg::FlashSale => sim::flash_sale(),
            other => {
                let fault = match other {
                    FaultArg::ConfigChange => FaultKind::ConfigChange,
                    FaultArg::ResourceExhaustion => FaultKind::ResourceExhaustion,
                    FaultArg::TrafficSurge => FaultKind::TrafficSurge,
                    _ => FaultKind::CascadingFailure,
                };
                let spec = ScenarioSpec {
                    seed: a.seed,
                    n_services: a.services,
                    hidden_edge_fraction: a.hidden_fraction,
                    fault,
                    cascade_depth: a.cascade_depth,
                    noise_level: a.noise,
                    namespace: a.namespace.clone(),
                };
                sim::generate(&spec).map_err(Failure::usage)?
            }
        };
        files::write_scenario(&a.out, &scenario)?;
        println!("scenario {}", scenario.name);
    }
    println!("manifest {}", files::manifest_hash(&a.out)?);
    Ok(())
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Output of `result.json`.
#[derive(Serialize)]
struct ResultFile<'a> {
    frontier: &'a std::collections::BTreeSet<EntityId>,
    terminated_by: Termination,
    policy: &'a str,
    seed: u64,
    window: TimeWindow,
    seeds: &'a [EntityId],
    policy_invocations: u64,
    budget_remaining: u32,
    external_retries: u64,
    fallback_ranking: &'a [eog_core::controller::RankedEntity],
}

fn cmd_investigate(a: InvestigateArgs, config_path: Option<&Path>) -> Result<(), Failure> {
    let fc = load_file_config(config_path)?;
    let snapshot_dir = a
        .snapshot
        .or(fc.snapshot)
        .ok_or_else(|| Failure::usage("--snapshot is required"))?;
    let policy_kind = a.policy.or(fc.policy).unwrap_or(PolicyArg::Oracle);
    let endpoint = a.endpoint.or(fc.endpoint);
    let defaults = BudgetConfig::default();
    let config = BudgetConfig {
        max_hops: a.budget.or(fc.budget).unwrap_or(defaults.max_hops),
        k_thresh: a.k_thresh.or(fc.k_thresh).unwrap_or(defaults.k_thresh),
        k_max: a.k_max.or(fc.k_max).unwrap_or(defaults.k_max),
        k_cool: a.k_cool.or(fc.k_cool).unwrap_or(defaults.k_cool),
        ..defaults
    };
    let window = match (a.window_start.or(fc.window_start), a.window_end.or(fc.window_end)) {
        (Some(s), Some(e)) => Some(TimeWindow::new(s, e).map_err(Failure::usage)?),
        (None, None) => None,
        _ => return Err(Failure::usage("--window-start and --window-end go together")),
    };
    let seed = a.seed.or(fc.seed).unwrap_or(0);
    let out = a.out.or(fc.out).unwrap_or_else(|| PathBuf::from("."));
    let timeout = Duration::from_secs(a.timeout_secs.or(fc.timeout_secs).unwrap_or(30));

    let snapshot = files::load_snapshot(&snapshot_dir)?;

    let mut policy = match policy_kind {
        PolicyArg::Oracle => Policy::Oracle(OraclePolicy::new(OracleConfig::default())),
        PolicyArg::Adversarial => Policy::Adversarial(AdversarialPolicy),
        PolicyArg::External => {
            let endpoint =
                endpoint.ok_or_else(|| Failure::usage("--policy external requires --endpoint"))?;
            if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
                Policy::Http(ExternalPolicy::new(
                    HttpTransport::new(&endpoint, timeout),
                    "external-http",
                ))
            } else {
                let mut parts = endpoint.split_whitespace().map(str::to_string);
                let program = parts
                    .next()
                    .ok_or_else(|| Failure::usage("empty --endpoint command"))?;
                let args: Vec<String> = parts.collect();
                let t = StdioTransport::spawn(&program, &args).map_err(|e| {
                    Failure::new(EXIT_POLICY, "policy", format!("cannot start `{program}`: {e}"))
                })?;
                Policy::Stdio(ExternalPolicy::new(t, "external-stdio"))
            }
        }
    };

    let mut inv = match &a.resume {
        Some(path) => {
            let cp = files::load_checkpoint(path)?;
            Investigation::restore(&snapshot, cp).map_err(Failure::data)?
        }
        None => Investigation::from_snapshot(&snapshot, config, window).map_err(|e| match e {
            ControllerError::InvalidConfig(_) => Failure::usage(e),
            other => Failure::data(other),
        })?,
    };
    let terminated_by = inv.run(policy.as_dyn());
    let name = policy.as_dyn().name().to_string();
    let result = inv.result(terminated_by);
    if let Some(path) = &a.checkpoint {
        files::save_checkpoint(path, &inv.checkpoint())?;
    }
    drop(inv);

    let external_retries = policy.retries();
    let diagnosis: Diagnosis = finalize(&result, &snapshot);
    files::write_json(&out.join("agent_output.json"), &diagnosis)?;
    files::write_ledger(&out.join("ledger.jsonl"), &result.ledger)?;
    files::write_json(
        &out.join("result.json"),
        &ResultFile {
            frontier: &result.frontier,
            terminated_by,
            policy: &name,
            seed,
            window: result.window,
            seeds: &result.seeds,
            policy_invocations: result.policy_invocations,
            budget_remaining: result.budget_remaining,
            external_retries,
            fallback_ranking: &result.fallback_ranking,
        },
    )?;

    let frontier: Vec<String> = result.frontier.iter().map(|e| e.to_string()).collect();
    println!("frontier: [{}]", frontier.join(", "));
    println!("policy invocations: {}", result.policy_invocations);
    match terminated_by {
        Termination::Quiescence => println!("terminated by quiescence"),
        Termination::BudgetExhausted => {
            println!("terminated by budget exhaustion");
            eprintln!(
                "{}",
                json!({"warning": "budget_exhausted", "policy_invocations": result.policy_invocations})
            );
        }
    }
    Ok(())
}

enum Policy {
    Oracle(OraclePolicy),
    Adversarial(AdversarialPolicy),
    Http(ExternalPolicy<HttpTransport>),
    Stdio(ExternalPolicy<StdioTransport>),
}

impl Policy {
    fn as_dyn(&mut self) -> &mut dyn AbductivePolicy {
        match self {
            Policy::Oracle(p) => p,
            Policy::Adversarial(p) => p,
            Policy::Http(p) => p,
            Policy::Stdio(p) => p,
        }
    }

    fn retries(&self) -> u64 {
        match self {
            Policy::Http(p) => p.retries(),
            Policy::Stdio(p) => p.retries(),
            _ => 0,
        }
    }
}

#[derive(Serialize)]
struct ScoresFile<'a> {
    ground_truth: String,
    runs: Vec<RunRecord<'a>>,
    aggregate: eog::evaluator::AggregateScores,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    output: String,
    #[serde(flatten)]
    scores: &'a RunScores,
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let k = a.k.unwrap_or(a.outputs.len());
    if k != a.outputs.len() {
        return Err(Failure::usage(format!(
            "--k {k} but {} outputs were given",
            a.outputs.len()
        )));
    }
    let gt = files::load_ground_truth(&a.gt)?;
    let mut runs = Vec::new();
    for path in &a.outputs {
        let diag: Diagnosis = files::read_json(path)?;
        let scores = score_run(&diag, &gt).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        runs.push(scores);
    }
    let predicate = a.success_f1.map_or(SuccessPredicate::default(), SuccessPredicate::F1);
    let agg = aggregate(std::slice::from_ref(&runs), predicate).map_err(Failure::data)?;

    println!("{:<4} {:>9} {:>9} {:>9} {:>9}  output", "run", "precision", "recall", "f1", "reasoning");
    for (i, (r, path)) in runs.iter().zip(&a.outputs).enumerate() {
        println!(
            "{:<4} {:>9.3} {:>9.3} {:>9.3} {:>9.3}  {}",
            i + 1,
            r.precision,
            r.recall,
            r.f1,
            r.reasoning,
            path.display()
        );
    }
    println!();
    println!("{:<12} {:>8}", "metric", "value");
    println!("{:<12} {:>8.3}", format!("pass@{k}"), agg.pass_at_k);
    println!("{:<12} {:>8.3}", format!("maj@{k}"), agg.majority_at_k);
    println!("{:<12} {:>8.3}", "gap", agg.reliability_gap);
    println!("{:<12} {:>8.3}", "mean f1", agg.mean_f1);
    println!("{:<12} {:>8.3}", "mean recall", agg.mean_recall);
    println!("{:<12} {:>8.3}", "reasoning", agg.mean_reasoning);

    let file = ScoresFile {
        ground_truth: a.gt.display().to_string(),
        runs: runs
            .iter()
            .zip(&a.outputs)
            .map(|(scores, p)| RunRecord {
                output: p.display().to_string(),
                scores,
            })
            .collect(),
        aggregate: agg,
    };
    files::write_json(&a.out, &file)?;
    Ok(())
}

fn invariant_name(e: &LedgerError) -> &'static str {
    match e {
        LedgerError::NonMonotoneStep { .. } => "monotone step",
        LedgerError::PreviousLabel { .. } => "previous label",
        LedgerError::VisitCount { .. } => "visit count",
        LedgerError::FlipCount { .. } => "flip count",
        LedgerError::FrozenReevaluated { .. } => "frozen node re-evaluated",
        LedgerError::InvalidClaim { .. } => "claim validity",
    }
}

fn print_timeline(entries: &[LedgerEntry]) {
    let mut last: BTreeMap<&EntityId, &Belief> = BTreeMap::new();
    for e in entries {
        let prev = e
            .previous_label
            .map_or_else(|| "-".to_string(), |l| l.to_string());
        let mut flags = Vec::new();
        if e.policy_failure.is_some() {
            flags.push("policy-failure");
        }
        if e.damped {
            flags.push("damped");
        }
        if e.frozen {
            flags.push("frozen");
        }
        let changed = last.get(&e.entity).is_none_or(|b| e.belief.differs_from(b));
        if changed {
            flags.push("broadcast");
        }
        println!(
            "step {:>3}  {}  {} -> {}  visit {} flips {}{}{}",
            e.step,
            e.entity,
            prev,
            e.belief.label,
            e.visit,
            e.flips,
            if flags.is_empty() { "" } else { "  " },
            flags.join(" ")
        );
        for c in &e.claims {
            println!("          claim {} -> {}: {}", c.source, c.target, c.condition);
        }
        last.insert(&e.entity, &e.belief);
    }
}

fn cmd_replay(a: ReplayArgs) -> Result<(), Failure> {
    let entries = files::read_ledger(&a.ledger)?;
    print_timeline(&entries);
    let summary = verify_ledger(&entries, a.k_thresh).map_err(|e| {
        Failure::new(
            EXIT_DATA,
            "inconsistent_ledger",
            format!("invariant `{}` violated: {e}", invariant_name(&e)),
        )
    })?;
    eog_core::controller::replay_ledger(&entries).map_err(|e| {
        Failure::new(
            EXIT_DATA,
            "inconsistent_ledger",
            format!("invariant `{}` violated: {e}", invariant_name(&e)),
        )
    })?;
    println!(
        "{} steps, {} entities, {} label changes, {} frozen",
        summary.steps,
        summary.entities,
        summary.label_changes,
        summary.frozen.len()
    );
    Ok(())
}
