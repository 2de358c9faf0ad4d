//! Episode records and the generic decision loop.

use std::io::Write;

use serde::Serialize;

use crate::error::SimError;
use crate::sim::Env;

/// One routing choice for one shuttle.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub shuttle: usize,
    pub action: usize,
    /// Log-probability of the choice under the acting policy; 0 for
    /// deterministic baselines.
    pub log_prob: f64,
    /// Legal set the choice was made from.
    pub legal: Vec<usize>,
}

/// Decisions made at one decision event and the reward of the step that
/// followed them. A step may carry no decision when every ready shuttle was
/// idle.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub clock: f64,
    pub decisions: Vec<Decision>,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub done: bool,
    pub truncated: bool,
    pub final_clock: f64,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Decision> {
        self.steps.iter().flat_map(|s| s.decisions.iter())
    }

    pub fn num_decisions(&self) -> usize {
        self.steps.iter().map(|s| s.decisions.len()).sum()
    }

    pub fn log_prob_sum(&self) -> f64 {
        self.decisions().map(|d| d.log_prob).sum()
    }

    /// Per-shuttle sequence of `(dispatch clock, target node)`.
    pub fn routes(&self, num_shuttles: usize) -> Vec<Vec<(f64, usize)>> {
        let mut routes = vec![Vec::new(); num_shuttles];
        for step in &self.steps {
            for d in &step.decisions {
                routes[d.shuttle].push((step.clock, d.action));
            }
        }
        routes
    }

    /// Writes one JSON object per decision: `clock`, `shuttle`, `action`,
    /// `reward`, `mask_size`. A step's reward is attached to its first
    /// decision; steps without decisions are written with null shuttle and
    /// action, so the `reward` column always sums to the episode return.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line {
            clock: f64,
            shuttle: Option<usize>,
            action: Option<usize>,
            reward: f64,
            mask_size: usize,
        }
        for step in &self.steps {
            let mut lines: Vec<Line> = step
                .decisions
                .iter()
                .map(|d| Line {
                    clock: step.clock,
                    shuttle: Some(d.shuttle),
                    action: Some(d.action),
                    reward: 0.0,
                    mask_size: d.legal.len(),
                })
                .collect();
            if lines.is_empty() {
                lines.push(Line {
                    clock: step.clock,
                    shuttle: None,
                    action: None,
                    reward: 0.0,
                    mask_size: 0,
                });
            }
            lines[0].reward = step.reward;
            for line in lines {
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Total time of an episode: minus the sum of its rewards.
pub fn episode_makespan(trajectory: &Trajectory) -> f64 {
    -trajectory.total_reward()
}

/// Drives `env` to termination. At each decision event every ready shuttle
/// with a non-empty legal set, in ascending id order, is asked for a node;
/// `choose` returns the node and its log-probability.
pub fn run_episode<E, F>(env: &mut Env<'_>, mut choose: F) -> Result<Trajectory, E>
where
    E: From<SimError>,
    F: FnMut(&Env<'_>, usize, &[usize]) -> Result<(usize, f64), E>,
{
    let mut traj = Trajectory::default();
    while !env.is_done() {
        let clock = env.clock();
        let mut decisions = Vec::new();
        for shuttle in env.ready_shuttles() {
            let legal = env.legal_actions(shuttle)?;
            if legal.is_empty() {
                continue;
            }
            let (action, log_prob) = choose(env, shuttle, &legal)?;
            env.dispatch(shuttle, action)?;
            decisions.push(Decision {
                shuttle,
                action,
                log_prob,
                legal,
            });
        }
        let outcome = env.advance()?;
        traj.steps.push(StepRecord {
            clock,
            decisions,
            reward: outcome.reward,
        });
    }
    traj.done = env.is_done();
    traj.truncated = env.is_truncated();
    traj.final_clock = env.clock();
    Ok(traj)
}
