//! Greedy evaluation and pairwise comparison of result sets.

use std::time::Instant;

use ffevss_core::{
    generate_instance, greedy_baseline, random_rollout, Difficulty, Env, InstanceError,
    NetworkInstance, Trajectory,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actor::{greedy_inference, ActorNet};
use crate::error::PolicyError;

/// First seed of the default held-out range (far below the training bit).
pub const HELD_OUT_SEED: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: Option<u64>,
    pub makespan: f64,
    pub decisions: usize,
    pub seconds: f64,
    pub completed: bool,
    pub max_charger_reuse: usize,
}

impl EpisodeResult {
    fn from_run(inst: &NetworkInstance, env: &Env<'_>, traj: &Trajectory, seconds: f64) -> Self {
        Self {
            seed: inst.seed(),
            makespan: -traj.total_reward(),
            decisions: traj.num_decisions(),
            seconds,
            completed: traj.done && !traj.truncated && env.all_demand_fulfilled(),
            max_charger_reuse: env.max_charger_reuse(),
        }
    }
}

/// `count` instances with consecutive seeds from `first_seed`.
pub fn held_out(
    n: usize,
    difficulty: Difficulty,
    shuttles: usize,
    drivers: usize,
    count: usize,
    first_seed: u64,
) -> Result<Vec<NetworkInstance>, InstanceError> {
    (0..count as u64)
        .map(|k| generate_instance(first_seed + k, n, difficulty, shuttles, drivers))
        .collect()
}

/// Greedy-decoded actor rollouts.
pub fn evaluate(
    actor: &ActorNet,
    instances: &[NetworkInstance],
) -> Result<Vec<EpisodeResult>, PolicyError> {
    instances
        .iter()
        .map(|inst| {
            let start = Instant::now();
            let mut env = Env::new(inst);
            let traj = greedy_inference(actor, &mut env)?;
            Ok(EpisodeResult::from_run(
                inst,
                &env,
                &traj,
                start.elapsed().as_secs_f64(),
            ))
        })
        .collect()
}

pub fn evaluate_greedy_baseline(
    instances: &[NetworkInstance],
) -> Result<Vec<EpisodeResult>, PolicyError> {
    instances
        .iter()
        .map(|inst| {
            let start = Instant::now();
            let mut env = Env::new(inst);
            let traj = greedy_baseline(&mut env)?;
            Ok(EpisodeResult::from_run(
                inst,
                &env,
                &traj,
                start.elapsed().as_secs_f64(),
            ))
        })
        .collect()
}

/// Uniform random legal policy; instance `k` uses RNG seed `seed + k`.
pub fn evaluate_random(
    instances: &[NetworkInstance],
    seed: u64,
) -> Result<Vec<EpisodeResult>, PolicyError> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let start = Instant::now();
            let mut env = Env::new(inst);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let traj = random_rollout(&mut env, &mut rng)?;
            Ok(EpisodeResult::from_run(
                inst,
                &env,
                &traj,
                start.elapsed().as_secs_f64(),
            ))
        })
        .collect()
}

pub fn mean_makespan(results: &[EpisodeResult]) -> f64 {
    results.iter().map(|r| r.makespan).sum::<f64>() / results.len().max(1) as f64
}

/// Percentage of paired instances where `a` performed at least as well
/// as `b` (ties count as wins).
pub fn win_pct(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired result sets");
    if a.is_empty() {
        return 0.0;
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x <= y).count();
    100.0 * wins as f64 / a.len() as f64
}
