//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use ffevss_core::oracle::replay;
use ffevss_core::{
    generate_instance, generate_with_counts, greedy_baseline, oracle_optimal, Difficulty, Env,
    FleetConfig, NetworkInstance, OracleLimits, RoleCounts,
};
use ffevss_nn::{check_gradients, sample_entries, Matrix, NnError, Tape};
use ffevss_rl::{
    evaluate, evaluate_greedy_baseline, evaluate_random, held_out, mean_makespan, rollout, train,
    Agent, Decode, EpisodeResult, ReplayEpisode, TrainConfig, TrainStats, HELD_OUT_SEED,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(out: &mut Vec<Outcome>, id: usize, title: &'static str, pass: bool, detail: String) {
    println!(
        "criterion {id} {} {title}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    out.push(Outcome {
        id,
        title,
        pass,
        detail,
    });
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Single-shuttle training run shared by the learning criteria.
fn training_config() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch: 64,
        seed: 1,
        ..TrainConfig::default()
    }
}

struct Trained {
    agent: Agent,
    stats: TrainStats,
    seconds: f64,
}

fn trained(config: &TrainConfig) -> Trained {
    let start = Instant::now();
    let (agent, stats) = train(config).expect("training run");
    Trained {
        agent,
        stats,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn conservation_and_reward_identity(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut violations = Vec::new();
    let mut identity_failures = 0;
    let mut steps_max = 0;
    let episodes = 1000u64;
    for seed in 0..episodes {
        let difficulty = Difficulty::ALL[(seed % 3) as usize];
        let shuttles = 1 + (seed % 2) as usize;
        let inst = generate_instance(seed, 23, difficulty, shuttles, 3).unwrap();
        let mut env = Env::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xACCE);
        let drivers = inst.total_drivers();
        let evs = env.evs_accounted();
        let mut reward_sum = 0.0;
        let check = |env: &Env<'_>, violations: &mut Vec<String>| {
            if env.drivers_accounted() != drivers {
                violations.push(format!(
                    "seed {seed}: drivers {} != {drivers}",
                    env.drivers_accounted()
                ));
            }
            if env.evs_accounted() != evs {
                violations.push(format!("seed {seed}: EVs {} != {evs}", env.evs_accounted()));
            }
            if env.ev_capacity_violated() {
                violations.push(format!("seed {seed}: two EVs at one node"));
            }
        };
        check(&env, &mut violations);
        while !env.is_done() {
            for shuttle in env.ready_shuttles() {
                let legal = env.legal_actions(shuttle).unwrap();
                if let Some(&a) = legal.choose(&mut rng) {
                    env.dispatch(shuttle, a).unwrap();
                    check(&env, &mut violations);
                }
            }
            reward_sum += env.advance().unwrap().reward;
            check(&env, &mut violations);
        }
        steps_max = steps_max.max(env.steps());
        if env.is_truncated() || !env.all_demand_fulfilled() || env.steps() > env.max_steps() {
            violations.push(format!("seed {seed}: ended without fulfilling demand"));
        }
        if (-reward_sum).to_bits() != env.clock().to_bits() {
            identity_failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        out,
        1,
        "conservation",
        violations.is_empty() && secs < 120.0,
        format!(
            "{episodes} random episodes, {} violations{}, max steps {steps_max} (cap 230), {secs:.1}s",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    );
    report(
        out,
        2,
        "reward identity",
        identity_failures == 0,
        format!(
            "-sum(r) == final clock bitwise on {}/{episodes} episodes",
            episodes - identity_failures
        ),
    );
}

fn gradient_check(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let agent = Agent::new(&TrainConfig {
        seed: 3,
        ..TrainConfig::default()
    });
    let inst = generate_instance(17, 10, Difficulty::Medium, 1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ep = ReplayEpisode::sample(&agent.actor, &agent.critic, inst, &mut rng).unwrap();
    let advantage = ep.reward - ep.value;

    let mut store = agent.actor.store.clone();
    let entries = sample_entries(&store, 50, &mut rng);
    let actor = check_gradients(&mut store, &entries, 1e-5, |s| {
        let mut net = agent.actor.clone();
        net.store = s.clone();
        let mut tape = Tape::new();
        let ro = rollout(
            &net,
            &mut Env::new(&ep.instance),
            &mut tape,
            Decode::Forced(&ep.actions),
        )
        .map_err(|e| NnError::Shape(e.to_string()))?;
        let loss = tape.scale(ro.log_prob.expect("episode has decisions"), -advantage);
        Ok((tape, loss))
    })
    .unwrap();

    let mut store = agent.critic.store.clone();
    let entries = sample_entries(&store, 50, &mut rng);
    let critic = check_gradients(&mut store, &entries, 1e-5, |s| {
        let mut net = agent.critic.clone();
        net.store = s.clone();
        let mut tape = Tape::new();
        let v = net
            .value(&mut tape, &ep.instance)
            .map_err(|e| NnError::Shape(e.to_string()))?;
        let r = tape.constant(Matrix::scalar(ep.reward));
        let d = tape.sub(v, r);
        let loss = tape.square(d);
        Ok((tape, loss))
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (ea, ec) = (actor.max_rel_error(), critic.max_rel_error());
    report(
        out,
        3,
        "gradient correctness",
        ea < 1e-3 && ec < 1e-3 && secs < 60.0,
        format!(
            "{} decisions on 10 nodes, max rel error actor {ea:.2e}, critic {ec:.2e} over 50 params each, {secs:.1}s",
            ep.actions.len()
        ),
    );
}

fn tiny(seed: u64) -> NetworkInstance {
    let counts = if seed.is_multiple_of(2) {
        RoleCounts {
            demanders: 2,
            chargers: 1,
            suppliers: 2,
            needs_charge: 1,
        }
    } else {
        RoleCounts {
            demanders: 2,
            chargers: 1,
            suppliers: 3,
            needs_charge: 1,
        }
    };
    let drivers = 1 + seed.is_multiple_of(3) as usize;
    generate_with_counts(seed, counts, FleetConfig::new(1, drivers)).unwrap()
}

fn oracle_equivalence(out: &mut Vec<Outcome>, agent: &Agent) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut strict = 0;
    for seed in 0..50 {
        let inst = tiny(seed);
        let sol = oracle_optimal(&Env::new(&inst), OracleLimits::default()).unwrap();
        let greedy = greedy_baseline(&mut Env::new(&inst)).unwrap().final_clock;
        let rl = evaluate(&agent.actor, std::slice::from_ref(&inst)).unwrap()[0].makespan;
        if sol.makespan > greedy || sol.makespan > rl {
            failures.push(format!(
                "seed {seed}: oracle {} greedy {greedy} rl {rl}",
                sol.makespan
            ));
        }
        if replay(&inst, &sol.actions).unwrap().to_bits() != sol.makespan.to_bits() {
            failures.push(format!("seed {seed}: replay mismatch"));
        }
        strict += usize::from(sol.makespan < greedy);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        out,
        4,
        "oracle equivalence",
        failures.is_empty() && secs < 300.0,
        format!(
            "50 tiny instances, oracle <= greedy and rl on all, strictly below greedy on {strict}, {} failures{}, {secs:.1}s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
}

fn training_improvement(out: &mut Vec<Outcome>, run: &Trained, insts: &[NetworkInstance]) {
    let rl = mean_makespan(&evaluate(&run.agent.actor, insts).unwrap());
    let greedy = mean_makespan(&evaluate_greedy_baseline(insts).unwrap());
    let random = mean_makespan(&evaluate_random(insts, 11).unwrap());
    let pass = rl <= 0.8 * random && rl <= 1.15 * greedy && run.seconds < 3600.0;
    report(
        out,
        5,
        "training improvement",
        pass,
        format!(
            "rl {rl:.3} vs random {random:.3} (limit {:.3}) and greedy {greedy:.3} (limit {:.3}); {:.1}% below random, {:+.1}% vs greedy; trained in {:.0}s",
            0.8 * random,
            1.15 * greedy,
            100.0 * (1.0 - rl / random),
            100.0 * (rl / greedy - 1.0),
            run.seconds
        ),
    );
}

fn distance_ablation(out: &mut Vec<Outcome>, with: &Trained, without: &Trained) {
    let a = with.stats.final_mean_reward(20);
    let b = without.stats.final_mean_reward(20);
    report(
        out,
        6,
        "distance ablation",
        a >= b,
        format!("final-20-epoch mean reward with distance {a:.3}, without {b:.3}"),
    );
}

fn multi_shuttle(out: &mut Vec<Outcome>, single: &Trained, fleet: &Trained) {
    let one = held_out(23, Difficulty::Easy, 1, 3, 128, HELD_OUT_SEED).unwrap();
    let two: Vec<NetworkInstance> = one.iter().map(|i| i.with_fleet(2, 3).unwrap()).collect();
    let g1 = mean_makespan(&evaluate_greedy_baseline(&one).unwrap());
    let g2 = mean_makespan(&evaluate_greedy_baseline(&two).unwrap());
    let r1 = mean_makespan(&evaluate(&single.agent.actor, &one).unwrap());
    let r2 = mean_makespan(&evaluate(&fleet.agent.actor, &two).unwrap());
    report(
        out,
        7,
        "multi-shuttle ordering",
        g2 < g1 && r2 < r1,
        format!("greedy 1 shuttle {g1:.3} vs 2 shuttles {g2:.3}; rl 1 shuttle {r1:.3} vs 2 shuttles {r2:.3}"),
    );
}

fn hard_instances(out: &mut Vec<Outcome>, agent: &Agent) {
    let insts = held_out(23, Difficulty::Hard, 1, 3, 128, HELD_OUT_SEED).unwrap();
    let summarize = |rs: &[EpisodeResult]| {
        let done = rs.iter().filter(|r| r.completed).count();
        let reuse = rs.iter().filter(|r| r.max_charger_reuse >= 2).count();
        (done, reuse)
    };
    let (gd, gr) = summarize(&evaluate_greedy_baseline(&insts).unwrap());
    let (rd, rr) = summarize(&evaluate(&agent.actor, &insts).unwrap());
    let need = (0.95 * 128.0_f64).ceil() as usize;
    report(
        out,
        8,
        "hard instances",
        gd == 128 && rd == 128 && gr >= need && rr >= need,
        format!("completed greedy {gd}/128, rl {rd}/128; charger reused in greedy {gr}/128, rl {rr}/128 episodes"),
    );
}

fn latency(out: &mut Vec<Outcome>, agent: &Agent) {
    let insts = held_out(100, Difficulty::Easy, 1, 3, 128, HELD_OUT_SEED).unwrap();
    let rs = evaluate(&agent.actor, &insts).unwrap();
    let secs = mean(rs.iter().map(|r| r.seconds));
    let worst = rs.iter().map(|r| r.seconds).fold(0.0, f64::max);
    let done = rs.iter().filter(|r| r.completed).count();
    report(
        out,
        9,
        "inference latency",
        secs < 1.0 && done == 128,
        format!("N=100 greedy decoding mean {secs:.3}s, max {worst:.3}s over 128 instances ({done} completed)"),
    );
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut out = Vec::new();
    conservation_and_reward_identity(&mut out);
    gradient_check(&mut out);

    let base = training_config();
    let with = trained(&base);
    let without = trained(&TrainConfig {
        distance: false,
        ..base.clone()
    });
    let fleet = trained(&TrainConfig {
        shuttles: 2,
        ..base.clone()
    });

    oracle_equivalence(&mut out, &with.agent);
    let insts = held_out(23, Difficulty::Easy, 1, 3, 128, HELD_OUT_SEED).unwrap();
    training_improvement(&mut out, &with, &insts);
    distance_ablation(&mut out, &with, &without);
    multi_shuttle(&mut out, &with, &fleet);
    hard_instances(&mut out, &with.agent);
    latency(&mut out, &with.agent);

    out.sort_by_key(|o| o.id);
    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        out.len() - failed.len(),
        out.len()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed criterion {} ({}): {}", o.id, o.title, o.detail);
        }
        std::process::exit(1);
    }
}
