//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eog::evaluator::{aggregate, reasoning_score, score_run, SuccessPredicate};
use eog::wire::{ExternalPolicy, HttpTransport};
use eog_core::controller::{
    finalize, run, ActivationReason, BudgetConfig, Diagnosis, DiagnosisEntity, Investigation,
    InvestigationEvent, StepOutcome, Termination,
};
use eog_core::metrics::aggregate_success;
use eog_core::policy::{oracle_evaluate, AdversarialPolicy, OracleConfig, OraclePolicy};
use eog_core::sim::{self, FaultKind, GroundTruth, GtGroup, GtPropagation, ScenarioSpec};
use eog_core::{Belief, CausalEdge, ContextPacket, EntityId, ExplanatoryGraph, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ScriptedServer, VALID_HEALTHY};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn oracle() -> OraclePolicy {
    OraclePolicy::new(OracleConfig::default())
}

fn flash_sale_golden() -> Outcome {
    let s = sim::flash_sale();
    let r = run(&s.snapshot, None, &mut oracle(), BudgetConfig::default()).map_err(|e| e.to_string())?;
    let frontier: Vec<&str> = r.frontier.iter().map(|e| e.name()).collect();
    ensure!(frontier == ["frontend"], "frontier {frontier:?}");
    ensure!(r.terminated_by == Termination::Quiescence, "terminated by {:?}", r.terminated_by);

    let first_gateway = r
        .ledger
        .iter()
        .find(|e| e.entity.name() == "gateway")
        .ok_or("gateway never evaluated")?;
    ensure!(
        first_gateway
            .claims
            .iter()
            .any(|c| c.source.name() == "processor" && c.target.name() == "gateway"),
        "first gateway evaluation claims {:?}",
        first_gateway.claims
    );
    let hidden_in_topology = s
        .snapshot
        .topology
        .edges()
        .iter()
        .any(|e| e.src.name() == "gateway" && e.dst.name() == "processor");
    ensure!(!hidden_in_topology, "gateway->processor should be absent from topology");

    let db_flip = r.ledger.iter().any(|e| {
        e.entity.name() == "database"
            && e.previous_label == Some(Label::Origin)
            && e.belief.label == Label::Symptom
    });
    ensure!(db_flip, "database never moved Origin -> Symptom");
    Ok(())
}

/// Origins not reachable from another Origin, via Warshall closure.
fn brute_frontier(labels: &[Label], edges: &[(usize, usize)]) -> BTreeSet<usize> {
    let n = labels.len();
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .filter(|&v| labels[v] == Label::Origin)
        .filter(|&v| !(0..n).any(|u| u != v && labels[u] == Label::Origin && reach[u][v]))
        .collect()
}

fn frontier_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let labels = [Label::Healthy, Label::Symptom, Label::Origin, Label::Defer];
    for case in 0..1000 {
        let n = rng.random_range(1..=6);
        let ids: Vec<EntityId> = (0..n)
            .map(|i| EntityId::new("ns", "Deployment", format!("n{i}")).unwrap())
            .collect();
        let lab: Vec<Label> = (0..n).map(|_| labels[rng.random_range(0..4)]).collect();
        // Random topological order, then forward edges only.
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((order[i], order[j]));
                }
            }
        }
        let mut g = ExplanatoryGraph::new();
        for (v, l) in ids.iter().zip(&lab) {
            g.set_belief(v.clone(), Belief::new(*l, "e", 0).unwrap());
        }
        for &(a, b) in &edges {
            let e = CausalEdge::new(ids[a].clone(), ids[b].clone(), "c", "e").unwrap();
            g.claim(e, &ids[b]).unwrap();
        }
        let got: BTreeSet<EntityId> = g.compute_frontier();
        let want: BTreeSet<EntityId> = brute_frontier(&lab, &edges)
            .into_iter()
            .map(|i| ids[i].clone())
            .collect();
        ensure!(got == want, "case {case}: labels {lab:?} edges {edges:?}: {got:?} != {want:?}");
    }
    Ok(())
}

fn termination_bound() -> Outcome {
    let config = BudgetConfig {
        max_hops: 100_000,
        k_thresh: 3,
        k_max: 5,
        k_cool: 2,
        ..BudgetConfig::default()
    };
    for seed in 0..100u64 {
        let mut spec = ScenarioSpec::new(seed, FaultKind::ALL[seed as usize % FaultKind::ALL.len()]);
        spec.n_services = 10;
        let s = sim::generate(&spec).map_err(|e| e.to_string())?;
        let window = Investigation::from_snapshot(&s.snapshot, config, None)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .window();
        // Seed every service so neighbouring flips keep reactivating each other.
        let seeds: Vec<InvestigationEvent> = s
            .snapshot
            .topology
            .nodes()
            .iter()
            .map(|v| InvestigationEvent::activate(v.clone(), ActivationReason::Seed))
            .collect();
        let n_seeds = seeds.len() as u64;
        let mut inv = Investigation::new(&s.snapshot, window, config, seeds).map_err(|e| e.to_string())?;
        let t = inv.run(&mut AdversarialPolicy);
        ensure!(t == Termination::Quiescence, "seed {seed}: terminated by {t:?}");
        let r = inv.result(t);
        let v_s = r.explanatory_graph.nodes().len() as u64;
        let bound = u64::from(config.k_thresh.min(config.k_max)) * v_s + n_seeds;
        ensure!(
            r.policy_invocations <= bound,
            "seed {seed}: {} invocations > bound {bound}",
            r.policy_invocations
        );
        let mut seen: BTreeMap<&EntityId, BTreeSet<Label>> = BTreeMap::new();
        for e in &r.ledger {
            seen.entry(&e.entity).or_default().insert(e.belief.label);
        }
        let oscillating: Vec<&EntityId> = seen
            .iter()
            .filter(|(_, ls)| ls.iter().filter(|l| **l != Label::Defer).count() >= 2)
            .map(|(v, _)| *v)
            .collect();
        ensure!(!oscillating.is_empty(), "seed {seed}: no node oscillated");
        for v in oscillating {
            let frozen = inv.node_state(v).is_some_and(|st| st.frozen_defer);
            let label = r.explanatory_graph.belief(v).map(|b| b.label);
            ensure!(
                frozen && label == Some(Label::Defer),
                "seed {seed}: oscillating {v} ends {label:?}, frozen {frozen}"
            );
        }
    }
    Ok(())
}

fn canonical_run(s: &sim::Scenario) -> Result<(String, Diagnosis), String> {
    let r = run(&s.snapshot, None, &mut oracle(), BudgetConfig::default())
        .map_err(|e| format!("seed {}: {e}", s.spec.seed))?;
    let d = finalize(&r, &s.snapshot);
    let bytes = serde_json::to_string(&(&d, &r.ledger, &r.frontier, r.terminated_by)).unwrap();
    Ok((bytes, d))
}

fn determinism() -> Outcome {
    let mut scores = Vec::new();
    for s in sim::scenario_suite(20, 0) {
        let mut runs = Vec::new();
        let mut texts = Vec::new();
        for _ in 0..3 {
            let (text, d) = canonical_run(&s)?;
            runs.push(score_run(&d, &s.ground_truth).map_err(|e| e.to_string())?);
            texts.push(text);
        }
        ensure!(
            texts.windows(2).all(|w| w[0] == w[1]),
            "{} (seed {}): runs differ",
            s.name,
            s.spec.seed
        );
        scores.push(runs);
    }
    let agg = aggregate(&scores, SuccessPredicate::default()).map_err(|e| e.to_string())?;
    ensure!(agg.k == 3 && agg.scenarios == 20, "k {} scenarios {}", agg.k, agg.scenarios);
    ensure!(agg.reliability_gap == 0.0, "gap {}", agg.reliability_gap);
    ensure!(
        agg.majority_at_k == agg.pass_at_k,
        "maj@3 {} pass@3 {}",
        agg.majority_at_k,
        agg.pass_at_k
    );
    Ok(())
}

fn solvability() -> Outcome {
    let mut failures = Vec::new();
    let mut faults = BTreeSet::new();
    for s in sim::scenario_suite(20, 0) {
        faults.insert(s.spec.fault);
        let (_, d) = canonical_run(&s)?;
        let sc = score_run(&d, &s.ground_truth).map_err(|e| e.to_string())?;
        if sc.recall != 1.0 || sc.precision < 0.8 {
            failures.push(format!(
                "{} seed {}: P {:.3} R {:.3}",
                s.name, s.spec.seed, sc.precision, sc.recall
            ));
        }
    }
    ensure!(faults.len() == FaultKind::ALL.len(), "suite covers {faults:?}");
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(())
}

fn group(id: &str, kind: &str, filter: &str, root: bool) -> GtGroup {
    GtGroup {
        id: id.into(),
        kind: kind.into(),
        filter: vec![filter.into()],
        namespace: "otel-demo".into(),
        root_cause: root,
    }
}

fn diagnosis(entities: &[(&str, &str)]) -> Diagnosis {
    Diagnosis {
        entities: entities
            .iter()
            .map(|(n, r)| DiagnosisEntity {
                name: (*n).into(),
                contributing_factor: true,
                reasoning: (*r).into(),
                evidence: String::new(),
                uncertain: None,
            })
            .collect(),
        ..Diagnosis::default()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn evaluator_conformance() -> Outcome {
    let gt = GroundTruth {
        groups: vec![
            group("load-generator-pod", "Pod", "load-generator-.*", true),
            group("load-generator-service", "Service", "load-generator", true),
            group("frontend-pod", "Pod", "frontend-.*", false),
        ],
        aliases: vec![vec!["load-generator-pod".into(), "load-generator-service".into()]],
        propagations: vec![GtPropagation {
            source: "load-generator-pod".into(),
            target: "frontend-pod".into(),
            condition: "configmap flagd-config sets loadGeneratorFloodHomepage".into(),
            effect: "frontend overloaded".into(),
            keywords: vec!["flagd-config".into(), "loadgeneratorfloodhomepage".into()],
            resource_terms: vec!["configmap".into()],
        }],
    };
    let score = |d: &Diagnosis| score_run(d, &gt).map_err(|e| e.to_string());

    let alias = score(&diagnosis(&[("otel-demo/Service/load-generator", "x")]))?;
    ensure!(alias.recall == 1.0 && alias.precision == 1.0, "alias match {alias:?}");

    let pod = score(&diagnosis(&[("otel-demo/Pod/load-generator-6b8d7c9f5-x2x4z", "x")]))?;
    ensure!(pod.recall == 1.0, "pod hash suffix {pod:?}");
    let wrong = score(&diagnosis(&[("otel-demo/Pod/load-generatorx", "x")]))?;
    ensure!(wrong.recall == 0.0, "partial name matched {wrong:?}");

    let mixed = score(&diagnosis(&[
        ("otel-demo/Service/load-generator", "x"),
        ("otel-demo/Pod/frontend-abc", "x"),
    ]))?;
    ensure!(
        close(mixed.precision, 0.5) && close(mixed.recall, 1.0) && close(mixed.f1, 2.0 / 3.0),
        "F1 fixture {mixed:?}"
    );
    let zero = score(&diagnosis(&[("otel-demo/Pod/frontend-abc", "x")]))?;
    ensure!(zero.f1 == 0.0, "F1 with P+R = 0: {}", zero.f1);

    let agg = aggregate_success(&[
        vec![true, false, false],
        vec![true, true, false],
        vec![false, false, false],
        vec![true, true, true],
    ])
    .map_err(|e| e.to_string())?;
    ensure!(
        close(agg.pass_at_k, 0.75) && close(agg.majority_at_k, 0.5) && close(agg.gap, 0.25),
        "success aggregate {agg:?}"
    );

    let kw = &gt.propagations[0].keywords;
    let rt = &gt.propagations[0].resource_terms;
    let full = reasoning_score("flagd-config enabled loadGeneratorFloodHomepage", kw, rt);
    let half = reasoning_score("configmap updated", kw, rt);
    let none = reasoning_score("pod restarted", kw, rt);
    ensure!(full == 1.0 && half == 0.5 && none == 0.0, "rubric {full}/{half}/{none}");
    let run = score(&diagnosis(&[("otel-demo/Pod/load-generator-1", "configmap updated")]))?;
    ensure!(run.reasoning == 0.5, "run reasoning {}", run.reasoning);
    Ok(())
}

fn checkpoint_equivalence() -> Outcome {
    let s = sim::flash_sale();
    let config = BudgetConfig::default();
    let fresh = Investigation::from_snapshot(&s.snapshot, config, None).map_err(|e| e.to_string())?;
    let mut whole = fresh.clone();
    let mut policy = oracle();
    let mut steps = 0;
    while !matches!(
        whole.step(&mut policy),
        StepOutcome::QueueEmpty | StepOutcome::BudgetExhausted
    ) {
        steps += 1;
    }
    let reference = serde_json::to_string(whole.ledger()).unwrap();
    for cut in 0..=steps {
        let mut inv = fresh.clone();
        let mut p = oracle();
        for _ in 0..cut {
            inv.step(&mut p);
        }
        let text = serde_json::to_string(&inv.checkpoint()).unwrap();
        drop(inv);
        let cp = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let mut resumed = Investigation::restore(&s.snapshot, cp).map_err(|e| format!("cut {cut}: {e}"))?;
        let mut p = oracle();
        resumed.run(&mut p);
        let ledger = serde_json::to_string(resumed.ledger()).unwrap();
        ensure!(ledger == reference, "cut {cut} of {steps}: ledger differs");
    }
    Ok(())
}

fn oracle_reply(body: &str) -> String {
    let req: serde_json::Value = serde_json::from_str(body).unwrap();
    let packet: ContextPacket = serde_json::from_value(req["packet"].clone()).unwrap();
    let mut out = serde_json::to_value(oracle_evaluate(&packet, &OracleConfig::default())).unwrap();
    out["version"] = 1.into();
    out.to_string()
}

fn wire_contract() -> Outcome {
    let s = sim::flash_sale();
    let timeout = Duration::from_secs(5);

    // The second evaluation gets two invalid replies; every other request
    // is answered by the oracle.
    let server = ScriptedServer::start(|i, body| match i {
        1 => "not json".into(),
        2 => r#"{"label":"Origin"}"#.into(),
        _ => oracle_reply(body),
    });
    let mut policy = ExternalPolicy::new(HttpTransport::new(&server.url, timeout), "http");
    let r = run(&s.snapshot, None, &mut policy, BudgetConfig::default()).map_err(|e| e.to_string())?;
    let reqs = server.requests();
    let parse = |t: &str| serde_json::from_str::<serde_json::Value>(t).map_err(|e| e.to_string());
    let (first, retry) = (parse(&reqs[1])?, parse(&reqs[2])?);
    ensure!(first.get("retry").is_none(), "first request carries retry");
    ensure!(retry["retry"]["error"].is_string(), "third request is not a retry: {retry}");
    ensure!(first["packet"] == retry["packet"], "retry changed the packet");
    ensure!(policy.retries() == 1, "retries {}", policy.retries());
    ensure!(reqs.len() == r.ledger.len() + 1, "{} requests for {} evaluations", reqs.len(), r.ledger.len());
    let failed = &r.ledger[1];
    ensure!(
        failed.belief.label == Label::Defer && failed.policy_failure.is_some(),
        "failed node ends {:?} with failure {:?}",
        failed.belief.label,
        failed.policy_failure
    );
    ensure!(r.ledger.len() > 2, "run stopped after the failure");
    ensure!(
        r.ledger.iter().filter(|e| e.policy_failure.is_some()).count() == 1,
        "other evaluations failed"
    );
    ensure!(r.terminated_by == Termination::Quiescence, "terminated by {:?}", r.terminated_by);

    // One invalid reply then a valid one: the retry succeeds.
    let server = ScriptedServer::start(|i, _| if i == 0 { "{}".into() } else { VALID_HEALTHY.into() });
    let mut policy = ExternalPolicy::new(HttpTransport::new(&server.url, timeout), "http");
    let r = run(&s.snapshot, None, &mut policy, BudgetConfig::default()).map_err(|e| e.to_string())?;
    ensure!(policy.retries() == 1, "retries {}", policy.retries());
    ensure!(
        r.ledger[0].policy_failure.is_none() && r.ledger[0].belief.label == Label::Healthy,
        "retry reply not used"
    );
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("flash-sale golden", flash_sale_golden),
        ("frontier oracle equivalence", frontier_oracle),
        ("termination bound", termination_bound),
        ("determinism and zero reliability gap", determinism),
        ("end-to-end solvability", solvability),
        ("evaluator conformance", evaluator_conformance),
        ("checkpoint equivalence", checkpoint_equivalence),
        ("wire-adapter contract", wire_contract),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {} {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name} ({ms} ms): {e}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
