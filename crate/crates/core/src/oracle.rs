//! Exact minimum-makespan routing for tiny instances.
//!
//! Depth-first search over every legal joint action, cloning the environment
//! at each branch. The greedy route seeds the incumbent; a branch is cut as
//! soon as an admissible lower bound on its makespan reaches the incumbent.

use crate::baseline::greedy_baseline;
use crate::error::OracleError;
use crate::event::EventKind;
use crate::instance::NetworkInstance;
use crate::sim::{Env, DEPOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_nodes: usize,
    pub max_shuttles: usize,
    pub max_drivers: usize,
    /// Hard cap on explored decision events.
    pub max_expansions: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_nodes: 8,
            max_shuttles: 2,
            max_drivers: 2,
            max_expansions: 50_000_000,
        }
    }
}

/// Per decision event, the `(shuttle, node)` pairs dispatched.
pub type ActionSequence = Vec<Vec<(usize, usize)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub makespan: f64,
    pub actions: ActionSequence,
    pub expansions: u64,
}

impl OracleLimits {
    pub fn check(&self, inst: &NetworkInstance) -> Result<(), OracleError> {
        let non_depot = inst.len() - 1;
        if non_depot > self.max_nodes {
            return Err(OracleError::LimitsExceeded(format!(
                "{non_depot} non-depot nodes (max {})",
                self.max_nodes
            )));
        }
        if inst.num_shuttles() > self.max_shuttles {
            return Err(OracleError::LimitsExceeded(format!(
                "{} shuttles (max {})",
                inst.num_shuttles(),
                self.max_shuttles
            )));
        }
        if inst.drivers_per_shuttle() > self.max_drivers {
            return Err(OracleError::LimitsExceeded(format!(
                "{} drivers per shuttle (max {})",
                inst.drivers_per_shuttle(),
                self.max_drivers
            )));
        }
        Ok(())
    }
}

struct Search {
    best: f64,
    best_actions: ActionSequence,
    path: ActionSequence,
    expansions: u64,
    budget: u64,
}

/// Minimum makespan reachable from `env` and a route achieving it.
pub fn oracle_optimal(env: &Env<'_>, limits: OracleLimits) -> Result<OracleSolution, OracleError> {
    limits.check(env.instance())?;
    let mut seed_env = env.clone();
    let greedy = greedy_baseline(&mut seed_env)?;
    let mut search = Search {
        best: f64::INFINITY,
        best_actions: Vec::new(),
        path: Vec::new(),
        expansions: 0,
        budget: limits.max_expansions,
    };
    if greedy.done && !greedy.truncated {
        search.best = seed_env.clock();
        search.best_actions = greedy
            .steps
            .iter()
            .map(|s| s.decisions.iter().map(|d| (d.shuttle, d.action)).collect())
            .collect();
    }
    explore(env, &mut search)?;
    Ok(OracleSolution {
        makespan: search.best,
        actions: search.best_actions,
        expansions: search.expansions,
    })
}

/// Admissible bound: every in-flight action and queued relocation must
/// finish, every shuttle must get back to the depot, and every driver still
/// in a relocation chain must be carried back from its demander.
fn lower_bound(env: &Env<'_>) -> f64 {
    let inst = env.instance();
    let mut bound = env.clock();
    for s in env.shuttles() {
        let (at, t) = match s.action {
            Some(d) => (d.target, d.complete_at),
            None => (s.location, env.clock()),
        };
        bound = bound.max(t + inst.travel_minutes(at, DEPOT));
    }
    for ev in env.pending_events() {
        let t = match ev.kind {
            EventKind::EvArrivesAtDemander => ev.fire_at + inst.travel_minutes(ev.node, DEPOT),
            _ => ev.fire_at,
        };
        bound = bound.max(t);
    }
    bound
}

fn explore(env: &Env<'_>, search: &mut Search) -> Result<(), OracleError> {
    if env.is_done() {
        if !env.is_truncated() && env.clock() < search.best {
            search.best = env.clock();
            search.best_actions = search.path.clone();
        }
        return Ok(());
    }
    if lower_bound(env) >= search.best {
        return Ok(());
    }
    search.expansions += 1;
    if search.expansions > search.budget {
        return Err(OracleError::Budget(search.expansions));
    }
    let ready = env.ready_shuttles();
    search.path.push(Vec::new());
    let result = assign(env, &ready, 0, search);
    search.path.pop();
    result
}

/// Branches over the choice of `ready[k]`, then the next ready shuttle,
/// and finally advances the clock.
fn assign(
    env: &Env<'_>,
    ready: &[usize],
    k: usize,
    search: &mut Search,
) -> Result<(), OracleError> {
    if k == ready.len() {
        let mut next = env.clone();
        next.advance()?;
        return explore(&next, search);
    }
    let shuttle = ready[k];
    let mut legal = env.legal_actions(shuttle)?;
    if legal.is_empty() {
        return assign(env, ready, k + 1, search);
    }
    legal.sort_by(|&a, &b| {
        env.action_cost(shuttle, a)
            .total_cmp(&env.action_cost(shuttle, b))
    });
    for node in legal {
        let mut child = env.clone();
        child.dispatch(shuttle, node)?;
        search
            .path
            .last_mut()
            .expect("open step")
            .push((shuttle, node));
        let r = assign(&child, ready, k + 1, search);
        search.path.last_mut().expect("open step").pop();
        r?;
    }
    Ok(())
}

/// Replays an action sequence from a fresh environment and returns the
/// final clock.
pub fn replay(inst: &NetworkInstance, actions: &ActionSequence) -> Result<f64, OracleError> {
    let mut env = Env::new(inst);
    for batch in actions {
        env.step(batch)?;
    }
    Ok(env.clock())
}
