use ffevss_core::{
    generate_instance, greedy_baseline, Difficulty, Env, EventKind, FleetConfig, NetworkInstance,
    Node, NodeRole, ObsConfig, SimError,
};

fn build(nodes: &[(f64, f64, NodeRole, u8)], fleet: FleetConfig) -> NetworkInstance {
    let nodes = nodes
        .iter()
        .enumerate()
        .map(|(id, &(x, y, role, initial_charge))| Node {
            id,
            x,
            y,
            role,
            initial_charge,
        })
        .collect();
    NetworkInstance::new(nodes, fleet, None).unwrap()
}

use NodeRole::{Charger, Demander, Depot, Supplier};

/// Depot, one fully charged supplier, one demander, one charger.
fn four_node() -> NetworkInstance {
    build(
        &[
            (0.1, 0.1, Depot, 0),
            (0.4, 0.2, Supplier, 5),
            (0.8, 0.7, Demander, 0),
            (0.2, 0.9, Charger, 0),
        ],
        FleetConfig::new(1, 3),
    )
}

#[test]
fn reset_matches_table_counts() {
    let inst = generate_instance(11, 23, Difficulty::Easy, 1, 3).unwrap();
    let mut env = Env::new(&inst);
    let out = env.reset();
    let s = env.state();
    assert_eq!(s.ev_present.iter().filter(|p| **p).count(), 8);
    assert_eq!(s.demand_open.iter().filter(|o| **o).count(), 7);
    assert!(s
        .shuttles
        .iter()
        .all(|sh| sh.location == 0 && sh.onboard == 3));
    assert!(s.chargers.available().iter().all(|a| *a));
    assert!(s.events.is_empty());
    assert_eq!(out.reward, 0.0);
    assert_eq!(out.clock, 0.0);
    assert_eq!(out.ready_shuttles, vec![0]);
    assert!(!out.done);
}

#[test]
fn no_demanders_is_done_at_reset() {
    let inst = build(
        &[
            (0.5, 0.5, Depot, 0),
            (0.1, 0.1, Supplier, 4),
            (0.9, 0.9, Charger, 0),
        ],
        FleetConfig::new(1, 2),
    );
    let mut env = Env::new(&inst);
    let out = env.reset();
    assert!(out.done);
    assert!(out.ready_shuttles.is_empty());
    assert_eq!(env.advance(), Err(SimError::EpisodeOver));
}

#[test]
fn loaded_shuttle_sees_only_the_supplier() {
    let inst = build(
        &[
            (0.5, 0.5, Depot, 0),
            (0.1, 0.1, Supplier, 5),
            (0.9, 0.9, Demander, 0),
        ],
        FleetConfig::new(1, 3),
    );
    let env = Env::new(&inst);
    assert_eq!(env.legal_actions(0).unwrap(), vec![1]);
}

#[test]
fn empty_shuttle_sees_only_driver_nodes() {
    let inst = build(
        &[
            (0.5, 0.5, Depot, 0),
            (0.1, 0.1, Supplier, 5),
            (0.5, 0.9, Supplier, 5),
            (0.9, 0.1, Supplier, 5),
            (0.15, 0.1, Demander, 0),
            (0.5, 0.3, Charger, 0),
            (0.3, 0.5, Charger, 0),
            (0.6, 0.6, Charger, 0),
            (0.7, 0.7, Charger, 0),
            (0.85, 0.1, Demander, 0),
        ],
        FleetConfig::new(1, 2),
    );
    let mut env = Env::new(&inst);
    env.step(&[(0, 1)]).unwrap();
    env.step(&[(0, 3)]).unwrap();
    assert_eq!(env.shuttle(0).unwrap().onboard, 0);
    assert!(env.state().ev_present[2]);
    assert_eq!(env.legal_actions(0).unwrap(), vec![4, 9]);
}

#[test]
fn assigned_node_is_masked_for_other_shuttles() {
    let inst = generate_instance(5, 23, Difficulty::Easy, 2, 3).unwrap();
    let mut env = Env::new(&inst);
    let first = env.legal_actions(0).unwrap();
    let node = first[0];
    assert!(env.legal_actions(1).unwrap().contains(&node));
    env.dispatch(0, node).unwrap();
    assert!(!env.legal_actions(1).unwrap().contains(&node));
    assert_eq!(
        env.legal_actions(0),
        Err(SimError::ShuttleBusy { shuttle: 0 })
    );
    assert_eq!(
        env.dispatch(0, first[1]),
        Err(SimError::ShuttleBusy { shuttle: 0 })
    );
}

#[test]
fn illegal_action_is_infeasible() {
    let inst = four_node();
    let mut env = Env::new(&inst);
    assert_eq!(
        env.dispatch(0, 2),
        Err(SimError::Infeasible {
            shuttle: 0,
            node: 2
        })
    );
    assert_eq!(
        env.dispatch(0, 0),
        Err(SimError::Infeasible {
            shuttle: 0,
            node: 0
        })
    );
    assert_eq!(env.dispatch(3, 1), Err(SimError::UnknownShuttle(3)));
}

#[test]
fn movement_step_reward_is_travel_time() {
    let inst = build(
        &[
            (0.0, 0.0, Depot, 0),
            (0.75, 0.0, Supplier, 5),
            (0.75, 0.5, Demander, 0),
        ],
        FleetConfig::new(1, 1),
    );
    let mut env = Env::new(&inst);
    let out = env.step(&[(0, 1)]).unwrap();
    assert_eq!(out.reward, -1.0);
    assert_eq!(out.clock, 1.0);
}

#[test]
fn waiting_step_reward_is_wait_time() {
    // A low EV detours via the charger; the shuttle heads straight for the
    // demander and waits there for the driver.
    let inst = build(
        &[
            (0.1, 0.1, Depot, 0),
            (0.2, 0.2, Supplier, 1),
            (0.3, 0.2, Demander, 0),
            (0.9, 0.9, Charger, 0),
        ],
        FleetConfig::new(1, 1),
    );
    let mut env = Env::new(&inst);
    env.step(&[(0, 1)]).unwrap();
    let arrival = env
        .pending_events()
        .find(|e| e.kind == EventKind::EvArrivesAtDemander)
        .unwrap()
        .fire_at;
    assert_eq!(env.legal_actions(0).unwrap(), vec![2]);
    let travel = inst.travel_minutes(1, 2);
    let expected_wait = arrival - env.clock() - travel;
    assert!(expected_wait > 0.0);
    assert_eq!(env.action_cost(0, 2), arrival - env.clock());
    let before = env.clock();
    let out = env.step(&[(0, 2)]).unwrap();
    assert_eq!(out.reward, -(travel + expected_wait));
    assert_eq!(out.reward, -(arrival - before));
    assert_eq!(out.clock, arrival);
    assert_eq!(env.shuttle(0).unwrap().onboard, 1);
    assert_eq!(env.legal_actions(0).unwrap(), vec![0]);
    let out = env.step(&[(0, 0)]).unwrap();
    assert!(out.done && !out.truncated);
}

#[test]
fn nearer_shuttle_becomes_ready_first() {
    let mut fleet = FleetConfig::new(2, 1);
    fleet.speed_mph = 15.0;
    let inst = build(
        &[
            (0.0, 0.0, Depot, 0),
            (0.25, 0.0, Supplier, 5),
            (0.75, 0.0, Supplier, 5),
            (0.0, 0.6, Demander, 0),
            (0.1, 0.9, Demander, 0),
        ],
        fleet,
    );
    let mut env = Env::new(&inst);
    let out = env.step(&[(0, 2), (1, 1)]).unwrap();
    assert_eq!(out.clock, 1.0);
    assert_eq!(out.reward, -1.0);
    assert_eq!(out.ready_shuttles, vec![1]);
    let far = env.shuttle(0).unwrap();
    assert_eq!(far.current_action(), Some(2));
    assert_eq!(far.action_complete_at(), Some(3.0));
}

#[test]
fn observation_features() {
    let inst = build(
        &[
            (0.1, 0.1, Depot, 0),
            (0.4, 0.2, Supplier, 2),
            (0.8, 0.7, Demander, 0),
            (0.2, 0.9, Charger, 0),
        ],
        FleetConfig::new(1, 3),
    );
    let mut env = Env::new(&inst);
    let obs = env.observe(0, ObsConfig::default());
    assert_eq!(obs.dynamic_dim, 5);
    assert_eq!(obs.dynamic_row(0)[2], 0.0);
    assert!((0..4).all(|n| obs.dynamic_row(n)[3] == 0.0));
    assert_eq!(obs.dynamic_row(3)[2], inst.travel_minutes(0, 3));
    assert_eq!(obs.static_row(1), &[0.4, 0.2, 2.0]);
    assert_eq!(obs.dynamic_row(1)[0], 1.0);

    env.step(&[(0, 1)]).unwrap();
    let obs = env.observe(0, ObsConfig::default());
    // EV now heads to the charger: the charger and the demander both
    // expect it, the supplier lost it.
    assert_eq!(obs.dynamic_row(1)[0], 0.0);
    assert_eq!(obs.dynamic_row(3)[0], 1.0);
    assert_eq!(obs.dynamic_row(2)[0], 1.0);
    assert_eq!(obs.dynamic_row(2)[1], 1.0);
    for n in 0..4 {
        assert_eq!(obs.dynamic_row(n)[4], 2.0);
    }
    assert_eq!(obs.location, 1);
    let clock = env.clock();
    for n in 0..4 {
        let first = env
            .pending_events()
            .filter(|e| e.node == n)
            .map(|e| e.fire_at)
            .fold(f64::INFINITY, f64::min);
        let want = if first.is_finite() {
            first - clock
        } else {
            0.0
        };
        assert_eq!(obs.dynamic_row(n)[3], want);
    }
    assert!(obs.dynamic_row(3)[3] > 0.0);
    assert!(obs.dynamic_row(2)[3] > obs.dynamic_row(3)[3]);

    let no_dist = env.observe(
        0,
        ObsConfig {
            distance: false,
            pending: true,
        },
    );
    assert_eq!(no_dist.dynamic_dim, 4);
    assert_eq!(no_dist.dynamic_row(2)[2], obs.dynamic_row(2)[3]);
    let plain = env.observe(
        0,
        ObsConfig {
            distance: false,
            pending: false,
        },
    );
    assert_eq!(plain.dynamic_dim, 3);
    assert_eq!(plain.dynamic_features.len(), 4 * 3);
}

#[test]
fn four_node_greedy_route_is_hand_computable() {
    let inst = four_node();
    let mut env = Env::new(&inst);
    let traj = greedy_baseline(&mut env).unwrap();
    let route: Vec<usize> = traj.decisions().map(|d| d.action).collect();
    assert_eq!(route, vec![1, 2, 0]);
    let expected =
        inst.travel_minutes(0, 1) + inst.travel_minutes(1, 2) + inst.travel_minutes(2, 0);
    assert_eq!(traj.final_clock, expected);
    assert_eq!(-traj.total_reward(), expected);
}

#[test]
fn busy_charger_blocks_second_low_ev_until_it_frees() {
    // One charger, two low EVs; the second drop-off must wait for the first
    // EV to leave the charger.
    let inst = build(
        &[
            (0.5, 0.5, Depot, 0),
            (0.4, 0.5, Supplier, 2),
            (0.6, 0.5, Supplier, 2),
            (0.5, 0.6, Charger, 0),
            (0.1, 0.1, Demander, 0),
            (0.9, 0.9, Demander, 0),
        ],
        FleetConfig::new(1, 2),
    );
    let mut env = Env::new(&inst);
    env.step(&[(0, 1)]).unwrap();
    let freed_at = env
        .pending_events()
        .find(|e| e.kind == EventKind::ChargingCompletes)
        .unwrap()
        .fire_at;
    assert!(!env.state().chargers.is_available(3));
    // Supplier 2 is masked while the charger is claimed.
    while env.clock() < freed_at {
        let legal = env.legal_actions(0).unwrap();
        assert!(!legal.contains(&2), "clock {} legal {legal:?}", env.clock());
        let pick = legal[0];
        env.step(&[(0, pick)]).unwrap();
    }
    assert!(env.state().chargers.is_available(3) || env.clock() >= freed_at);
    let mut second_charger_arrival = None;
    while !env.is_done() {
        let legal = env.legal_actions(0).unwrap();
        let pick = if legal.contains(&2) { 2 } else { legal[0] };
        env.step(&[(0, pick)]).unwrap();
        if second_charger_arrival.is_none() {
            second_charger_arrival = env
                .pending_events()
                .find(|e| e.kind == EventKind::EvArrivesAtCharger)
                .map(|e| e.fire_at);
        }
    }
    assert!(second_charger_arrival.unwrap() >= freed_at);
    assert_eq!(env.max_charger_reuse(), 2);
    assert!(env.all_demand_fulfilled());
}
