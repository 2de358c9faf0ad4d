//! Pointer-style actor: node embeddings, a recurrent decoder fed with the
//! last dispatched node, and additive attention over nodes.

use ffevss_core::sim::static_features;
use ffevss_core::{run_episode, Env, NetworkInstance, ObsConfig, Observation, Trajectory, DEPOT};
use ffevss_nn::{
    masked_softmax, Attention, Linear, LstmCell, LstmState, Matrix, ParamStore, Tape, Var,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::PolicyError;

pub const HIDDEN: usize = 128;
pub const STATIC_DIM: usize = 3;

/// How the next node is picked from the policy distribution.
pub enum Decode<'r> {
    Sample(&'r mut dyn RngCore),
    Greedy,
    /// Replays a fixed action list, scoring each choice.
    Forced(&'r [usize]),
}

#[derive(Debug, Clone)]
pub struct ActorNet {
    pub store: ParamStore,
    pub obs: ObsConfig,
    pub hidden: usize,
    static_emb: Linear,
    dynamic_emb: Linear,
    decoder: LstmCell,
    attention: Attention,
}

/// Per-episode values shared by every decision, plus the decoder state.
#[derive(Debug, Clone)]
pub struct Episode {
    n: usize,
    static_emb: Var,
    static_proj: Var,
    dyn_w: Var,
    dyn_b: Var,
    pub decoder: LstmState,
    /// Last node dispatched by any shuttle; the depot before the first.
    pub last: usize,
    mark: usize,
}

#[derive(Debug, Clone)]
pub struct ActOutput {
    pub action: usize,
    pub log_prob: Var,
    pub probs: Vec<f64>,
}

impl ActorNet {
    pub fn new(seed: u64, obs: ObsConfig, hidden: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let static_emb = Linear::new(&mut store, "actor.static", STATIC_DIM, hidden, &mut rng);
        let dynamic_emb = Linear::new(
            &mut store,
            "actor.dynamic",
            obs.dynamic_features(),
            hidden,
            &mut rng,
        );
        let decoder = LstmCell::new(&mut store, "actor.decoder", hidden, hidden, &mut rng);
        let attention = Attention::new(
            &mut store,
            "actor.attention",
            2 * hidden,
            hidden,
            hidden,
            &mut rng,
        );
        Self {
            store,
            obs,
            hidden,
            static_emb,
            dynamic_emb,
            decoder,
            attention,
        }
    }

    /// Embeds the static features and precomputes the attention terms that
    /// do not change during the episode.
    ///
    /// The attention input for node `n` is `(x̄_s; x̄_d)`, so `W` splits into
    /// a static block, a dynamic block and a query block. The dynamic block
    /// is folded into the dynamic embedding: `W_d (W^d x + b^d)`.
    pub fn begin(&self, tape: &mut Tape, inst: &NetworkInstance) -> Result<Episode, PolicyError> {
        let n = inst.len();
        let h = self.hidden;
        let xs = tape.constant(Matrix::from_vec(n, STATIC_DIM, static_features(inst)));
        let static_emb = self.static_emb.forward(tape, &self.store, xs)?;
        let w_s = self.attention.block(tape, &self.store, 0, h);
        let static_proj = tape.matmul_t(static_emb, w_s);
        let w_d = self.attention.block(tape, &self.store, h, 2 * h);
        let emb_w = tape.param(&self.store, self.dynamic_emb.w);
        let emb_b = tape.param(&self.store, self.dynamic_emb.b);
        let dyn_w = tape.matmul(w_d, emb_w);
        let dyn_b = tape.matmul_t(emb_b, w_d);
        for id in self.store.ids() {
            tape.param(&self.store, id);
        }
        self.attention.block(tape, &self.store, 2 * h, 3 * h);
        let decoder = LstmState::zeros(tape, h);
        let mark = tape.len();
        Ok(Episode {
            n,
            static_emb,
            static_proj,
            dyn_w,
            dyn_b,
            decoder,
            last: DEPOT,
            mark,
        })
    }

    /// Logits over all nodes (`1×n`) after advancing the decoder with the
    /// last dispatched node.
    pub fn logits(
        &self,
        tape: &mut Tape,
        ep: &mut Episode,
        obs: &Observation,
    ) -> Result<Var, PolicyError> {
        let dim = self.obs.dynamic_features();
        if obs.n_nodes != ep.n || obs.dynamic_dim != dim {
            return Err(ffevss_nn::NnError::Shape(format!(
                "observation {}x{}, policy expects {}x{}",
                obs.n_nodes, obs.dynamic_dim, ep.n, dim
            ))
            .into());
        }
        let mut pick = Matrix::zeros(1, ep.n);
        pick.data[ep.last] = 1.0;
        let pick = tape.constant(pick);
        let input = tape.matmul(pick, ep.static_emb);
        ep.decoder = self.decoder.forward(tape, &self.store, input, ep.decoder)?;

        let xd = tape.constant(Matrix::from_vec(ep.n, dim, obs.dynamic_features.clone()));
        let dyn_proj = tape.matmul_t(xd, ep.dyn_w);
        let proj = tape.add(ep.static_proj, dyn_proj);
        let proj = tape.add_row(proj, ep.dyn_b);
        let u = self
            .attention
            .scores_projected(tape, &self.store, proj, ep.decoder.h)?;
        Ok(tape.reshape(u, 1, ep.n))
    }

    /// One decision for a shuttle: scores nodes, masks to `legal`, picks.
    pub fn act(
        &self,
        tape: &mut Tape,
        ep: &mut Episode,
        obs: &Observation,
        legal: &[usize],
        decode: &mut Decode<'_>,
        decision_index: usize,
    ) -> Result<ActOutput, PolicyError> {
        if legal.is_empty() {
            return Err(ffevss_nn::NnError::EmptyLegal.into());
        }
        let u = self.logits(tape, ep, obs)?;
        let mut mask = vec![false; ep.n];
        for &a in legal {
            mask[a] = true;
        }
        let probs = masked_softmax(&tape.value(u).data, &mask)?;
        let action = match decode {
            Decode::Greedy => argmax(&probs, legal),
            Decode::Sample(rng) => sample(&probs, legal, &mut **rng),
            Decode::Forced(actions) => {
                let a = *actions
                    .get(decision_index)
                    .ok_or(PolicyError::ForcedExhausted(decision_index))?;
                if !mask.get(a).copied().unwrap_or(false) {
                    return Err(PolicyError::ForcedIllegal {
                        shuttle: obs.location,
                        action: a,
                    });
                }
                a
            }
        };
        let (log_prob, probs) = tape.log_prob(u, &mask, action)?;
        ep.last = action;
        Ok(ActOutput {
            action,
            log_prob,
            probs,
        })
    }

    /// Drops everything recorded after [`ActorNet::begin`] except the
    /// decoder state. Used when no gradient is needed.
    pub fn compact(&self, tape: &mut Tape, ep: &mut Episode) {
        let h = tape.value(ep.decoder.h).clone();
        let c = tape.value(ep.decoder.c).clone();
        tape.truncate(ep.mark);
        ep.decoder = LstmState {
            h: tape.constant(h),
            c: tape.constant(c),
        };
    }
}

/// Legal node with the highest score; ties go to the earliest in `legal`.
pub fn argmax(probs: &[f64], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &a in &legal[1..] {
        if probs[a] > probs[best] {
            best = a;
        }
    }
    best
}

fn sample(probs: &[f64], legal: &[usize], rng: &mut dyn RngCore) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for &a in legal {
        acc += probs[a];
        if r < acc {
            return a;
        }
    }
    *legal
        .iter()
        .rev()
        .find(|&&a| probs[a] > 0.0)
        .unwrap_or(&legal[legal.len() - 1])
}

/// An episode played by the actor, with the summed log-probability of its
/// choices recorded on the tape (absent when no decision was made).
#[derive(Debug)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub log_prob: Option<Var>,
}

/// Plays `env` to termination. Ready shuttles act in ascending id order,
/// each seeing distances from its own location; a single decoder state
/// follows the global dispatch order.
pub fn rollout(
    actor: &ActorNet,
    env: &mut Env<'_>,
    tape: &mut Tape,
    mut decode: Decode<'_>,
) -> Result<Rollout, PolicyError> {
    let mut ep = actor.begin(tape, env.instance())?;
    let mut log_probs: Vec<Var> = Vec::new();
    let obs_cfg = actor.obs;
    let trajectory = run_episode(env, |env, shuttle, legal| {
        let obs = env.observe(shuttle, obs_cfg);
        let out = actor.act(tape, &mut ep, &obs, legal, &mut decode, log_probs.len())?;
        log_probs.push(out.log_prob);
        Ok::<_, PolicyError>((out.action, tape.value(out.log_prob).item()))
    })?;
    let log_prob = log_probs.iter().copied().reduce(|a, b| tape.add(a, b));
    Ok(Rollout {
        trajectory,
        log_prob,
    })
}

/// [`rollout`] for a single-shuttle instance.
pub fn rollout_single(
    actor: &ActorNet,
    env: &mut Env<'_>,
    tape: &mut Tape,
    decode: Decode<'_>,
) -> Result<Rollout, PolicyError> {
    let shuttles = env.instance().num_shuttles();
    if shuttles != 1 {
        return Err(PolicyError::NotSingleShuttle(shuttles));
    }
    rollout(actor, env, tape, decode)
}

/// [`rollout`] for any fleet size.
pub fn rollout_fleet(
    actor: &ActorNet,
    env: &mut Env<'_>,
    tape: &mut Tape,
    decode: Decode<'_>,
) -> Result<Rollout, PolicyError> {
    rollout(actor, env, tape, decode)
}

/// Greedy decoding without keeping a gradient record.
pub fn greedy_inference(actor: &ActorNet, env: &mut Env<'_>) -> Result<Trajectory, PolicyError> {
    let mut tape = Tape::new();
    let mut ep = actor.begin(&mut tape, env.instance())?;
    let obs_cfg = actor.obs;
    let mut decisions = 0;
    run_episode(env, |env, shuttle, legal| {
        let obs = env.observe(shuttle, obs_cfg);
        let out = actor.act(
            &mut tape,
            &mut ep,
            &obs,
            legal,
            &mut Decode::Greedy,
            decisions,
        )?;
        decisions += 1;
        let lp = tape.value(out.log_prob).item();
        actor.compact(&mut tape, &mut ep);
        Ok::<_, PolicyError>((out.action, lp))
    })
}
