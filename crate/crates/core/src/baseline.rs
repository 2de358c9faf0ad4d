//! Non-learned reference policies.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::SimError;
use crate::sim::Env;
use crate::trajectory::{run_episode, Trajectory};

/// Nearest-feasible routing: every ready shuttle takes the legal node with
/// the smallest immediate cost (travel time, or the known wait when staying
/// put). Ties go to the lowest node index.
pub fn greedy_baseline(env: &mut Env<'_>) -> Result<Trajectory, SimError> {
    run_episode(env, |env: &Env<'_>, shuttle, legal: &[usize]| {
        Ok::<_, SimError>((greedy_choice(env, shuttle, legal), 0.0))
    })
}

pub fn greedy_choice(env: &Env<'_>, shuttle: usize, legal: &[usize]) -> usize {
    let mut best = legal[0];
    let mut best_cost = env.action_cost(shuttle, best);
    for &n in &legal[1..] {
        let cost = env.action_cost(shuttle, n);
        if cost < best_cost {
            best = n;
            best_cost = cost;
        }
    }
    best
}

/// Uniformly random legal routing.
pub fn random_rollout<R: Rng + ?Sized>(
    env: &mut Env<'_>,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    run_episode(env, |_env: &Env<'_>, _shuttle, legal: &[usize]| {
        let action = *legal.choose(rng).expect("legal set is non-empty");
        Ok::<_, SimError>((action, -(legal.len() as f64).ln()))
    })
}
