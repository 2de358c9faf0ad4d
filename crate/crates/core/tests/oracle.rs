use ffevss_core::oracle::replay;
use ffevss_core::{
    generate_with_counts, greedy_baseline, oracle_optimal, Env, FleetConfig, NetworkInstance, Node,
    NodeRole, OracleError, OracleLimits, RoleCounts,
};

fn tiny(seed: u64) -> NetworkInstance {
    let counts = RoleCounts {
        demanders: 2,
        chargers: 1,
        suppliers: 2,
        needs_charge: 1,
    };
    generate_with_counts(seed, counts, FleetConfig::new(1, 2)).unwrap()
}

#[test]
fn single_forced_route_matches_closed_form() {
    let nodes = vec![
        Node {
            id: 0,
            x: 0.0,
            y: 0.5,
            role: NodeRole::Depot,
            initial_charge: 0,
        },
        Node {
            id: 1,
            x: 0.3,
            y: 0.5,
            role: NodeRole::Supplier,
            initial_charge: 5,
        },
        Node {
            id: 2,
            x: 0.9,
            y: 0.5,
            role: NodeRole::Demander,
            initial_charge: 0,
        },
    ];
    let inst = NetworkInstance::new(nodes, FleetConfig::new(1, 1), None).unwrap();
    let sol = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap();
    let t = |a, b| inst.travel_minutes(a, b);
    assert_eq!(sol.makespan, t(0, 1) + t(1, 2) + t(2, 0));
    assert_eq!(sol.actions, vec![vec![(0, 1)], vec![(0, 2)], vec![(0, 0)]]);
}

#[test]
fn oracle_never_loses_to_greedy() {
    let mut strict = 0;
    for seed in 0..50 {
        let inst = tiny(seed);
        let sol = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap();
        let mut env = Env::new(&inst);
        let greedy = greedy_baseline(&mut env).unwrap();
        assert!(sol.makespan <= greedy.final_clock, "seed {seed}");
        if sol.makespan < greedy.final_clock {
            strict += 1;
        }
        assert_eq!(replay(&inst, &sol.actions).unwrap(), sol.makespan);
    }
    assert!(strict >= 1, "oracle never strictly improved on greedy");
}

#[test]
fn oracle_ignores_node_labels() {
    for seed in 0..10 {
        let inst = tiny(seed);
        let perm = [0, 5, 3, 1, 4, 2];
        let relabeled = inst.relabeled(&perm).unwrap();
        let a = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap();
        let b = oracle_optimal(&Env::new(&relabeled), OracleLimits::default()).unwrap();
        assert_eq!(a.makespan, b.makespan, "seed {seed}");
    }
}

#[test]
fn oracle_handles_two_shuttles() {
    let counts = RoleCounts {
        demanders: 2,
        chargers: 1,
        suppliers: 3,
        needs_charge: 2,
    };
    let inst = generate_with_counts(4, counts, FleetConfig::new(2, 1)).unwrap();
    let sol = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap();
    let mut env = Env::new(&inst);
    let greedy = greedy_baseline(&mut env).unwrap();
    assert!(sol.makespan <= greedy.final_clock);
    assert_eq!(replay(&inst, &sol.actions).unwrap(), sol.makespan);
}

#[test]
fn oracle_refuses_large_instances() {
    let counts = RoleCounts {
        demanders: 3,
        chargers: 3,
        suppliers: 3,
        needs_charge: 1,
    };
    let inst = generate_with_counts(1, counts, FleetConfig::new(1, 2)).unwrap();
    let err = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap_err();
    assert!(matches!(err, OracleError::LimitsExceeded(_)));

    let inst = tiny(1).with_fleet(3, 1).unwrap();
    assert!(matches!(
        oracle_optimal(&Env::new(&inst), OracleLimits::default()),
        Err(OracleError::LimitsExceeded(_))
    ));
    let inst = tiny(1).with_fleet(1, 3).unwrap();
    assert!(matches!(
        oracle_optimal(&Env::new(&inst), OracleLimits::default()),
        Err(OracleError::LimitsExceeded(_))
    ));
}

#[test]
fn expansion_budget_is_enforced() {
    let limits = OracleLimits {
        max_expansions: 3,
        ..OracleLimits::default()
    };
    let err = oracle_optimal(&Env::new(&tiny(2)), limits).unwrap_err();
    assert!(matches!(err, OracleError::Budget(_)));
}
