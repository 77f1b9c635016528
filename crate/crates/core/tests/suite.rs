use eog_core::controller::{run, verify_ledger, BudgetConfig, Termination};
use eog_core::policy::{OracleConfig, OraclePolicy};
use eog_core::sim::{generate, scenario_suite, FaultKind, ScenarioSpec};

#[test]
fn oracle_frontier_is_the_injected_root() {
    for s in scenario_suite(24, 1000) {
        let mut policy = OraclePolicy::new(OracleConfig::default());
        let r = run(&s.snapshot, None, &mut policy, BudgetConfig::default()).unwrap();
        assert_eq!(r.terminated_by, Termination::Quiescence, "{}", s.name);
        let frontier: Vec<_> = r.frontier.iter().cloned().collect();
        assert_eq!(frontier, vec![s.root.clone()], "{}", s.name);
        verify_ledger(&r.ledger, 3).unwrap();
    }
}

#[test]
fn ten_service_scenarios_of_every_fault() {
    for fault in FaultKind::ALL {
        for seed in 0..5 {
            let spec = ScenarioSpec {
                n_services: 10,
                ..ScenarioSpec::new(seed, fault)
            };
            let s = generate(&spec).unwrap();
            let mut policy = OraclePolicy::new(OracleConfig::default());
            let r = run(&s.snapshot, None, &mut policy, BudgetConfig::default()).unwrap();
            let frontier: Vec<_> = r.frontier.iter().cloned().collect();
            assert_eq!(frontier, vec![s.root.clone()], "{}", s.name);
        }
    }
}
