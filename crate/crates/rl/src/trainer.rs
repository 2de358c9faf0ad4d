//! REINFORCE with a learned initial-state baseline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ffevss_core::{generate_instance, Difficulty, Env, NetworkInstance, ObsConfig};
use ffevss_nn::{Adam, Checkpoint, Matrix, NnError, ParamStore, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor::{rollout, ActorNet, Decode, HIDDEN};
use crate::critic::CriticNet;
use crate::error::{PolicyError, TrainError};

/// Training seeds carry this bit; held-out evaluation seeds never do.
pub const TRAIN_SEED_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// One network size and one difficulty.
    Rl,
    /// One size, difficulty drawn per episode from the configured list.
    GenRl,
    /// Difficulty fixed, size drawn per episode from the configured list.
    NetRl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub max_steps: Option<usize>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub sizes: Vec<usize>,
    pub difficulties: Vec<Difficulty>,
    pub shuttles: usize,
    pub drivers: usize,
    pub seed: u64,
    pub flavor: Flavor,
    pub distance: bool,
    pub hidden: usize,
    pub grad_clip: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Centre the critic output on one sampled batch before the first epoch.
    #[serde(default)]
    pub critic_warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch: 64,
            max_steps: None,
            lr_actor: 1e-4,
            lr_critic: 1e-4,
            sizes: vec![23],
            difficulties: vec![Difficulty::Easy],
            shuttles: 1,
            drivers: 3,
            seed: 0,
            flavor: Flavor::Rl,
            distance: true,
            hidden: HIDDEN,
            grad_clip: None,
            checkpoint_every: None,
            checkpoint_dir: None,
            critic_warm_start: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 || self.batch == 0 || self.hidden == 0 {
            return bad("epochs, batch and hidden must be positive");
        }
        if self.shuttles == 0 || self.drivers == 0 {
            return bad("shuttles and drivers must be positive");
        }
        if self.sizes.is_empty() || self.difficulties.is_empty() {
            return bad("at least one size and one difficulty required");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be positive");
        }
        if let Some(c) = self.grad_clip {
            if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return bad("grad_clip must be positive");
            }
        }
        for &n in &self.sizes {
            for &d in &self.difficulties {
                d.counts(n)?;
            }
        }
        Ok(())
    }

    pub fn obs(&self) -> ObsConfig {
        ObsConfig {
            distance: self.distance,
            pending: true,
        }
    }

    /// Training instance for episode `m` of `epoch`.
    pub fn episode_instance(&self, epoch: usize, m: usize) -> Result<NetworkInstance, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, epoch as u64, m as u64, 0));
        let n = match self.flavor {
            Flavor::NetRl => self.sizes[rng.gen_range(0..self.sizes.len())],
            _ => self.sizes[0],
        };
        let d = match self.flavor {
            Flavor::GenRl => self.difficulties[rng.gen_range(0..self.difficulties.len())],
            _ => self.difficulties[0],
        };
        let seed = rng.gen::<u64>() | TRAIN_SEED_BIT;
        Ok(generate_instance(seed, n, d, self.shuttles, self.drivers)?)
    }
}

/// SplitMix-style combination of the run seed with episode coordinates.
fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed;
    for v in [a, b, c] {
        z = z.wrapping_add(v.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub critic_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
}

impl TrainStats {
    /// Mean of `mean_reward` over the last `k` epochs.
    pub fn final_mean_reward(&self, k: usize) -> f64 {
        let tail = &self.epochs[self.epochs.len().saturating_sub(k)..];
        tail.iter().map(|e| e.mean_reward).sum::<f64>() / tail.len().max(1) as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record([
            "epoch",
            "mean_R",
            "mean_advantage",
            "critic_loss",
            "seconds",
        ])
        .map_err(csv_err)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.mean_reward.to_string(),
                e.mean_advantage.to_string(),
                e.critic_loss.to_string(),
                e.seconds.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> TrainError {
    TrainError::Io(std::io::Error::other(e))
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: ActorNet,
    pub critic: CriticNet,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub epochs_done: usize,
}

impl Agent {
    pub fn new(config: &TrainConfig) -> Self {
        let actor = ActorNet::new(mix(config.seed, 1, 0, 0), config.obs(), config.hidden);
        let critic = CriticNet::new(mix(config.seed, 2, 0, 0), config.hidden);
        let actor_opt = Adam::new(&actor.store, config.lr_actor);
        let critic_opt = Adam::new(&critic.store, config.lr_critic);
        Self {
            actor,
            critic,
            actor_opt,
            critic_opt,
            epochs_done: 0,
        }
    }

    pub fn to_checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_store("actor", &self.actor.store);
        ck.put_store("critic", &self.critic.store);
        ck.optimizers.insert("actor".into(), self.actor_opt.clone());
        ck.optimizers
            .insert("critic".into(), self.critic_opt.clone());
        ck.meta = serde_json::json!({ "config": config, "epochs_done": self.epochs_done });
        ck
    }

    pub fn save(&self, config: &TrainConfig, path: &Path) -> Result<(), TrainError> {
        Ok(self.to_checkpoint(config).save(path)?)
    }

    /// Rebuilds an agent and its config from a checkpoint file.
    pub fn load(path: &Path) -> Result<(Agent, TrainConfig), TrainError> {
        let ck = Checkpoint::load(path)?;
        let config: TrainConfig = serde_json::from_value(ck.meta["config"].clone())
            .map_err(|e| NnError::Checkpoint(format!("config: {e}")))?;
        let mut agent = Agent::new(&config);
        ck.load_store("actor", &mut agent.actor.store)?;
        ck.load_store("critic", &mut agent.critic.store)?;
        if let Some(opt) = ck.optimizers.get("actor") {
            agent.actor_opt = opt.clone();
        }
        if let Some(opt) = ck.optimizers.get("critic") {
            agent.critic_opt = opt.clone();
        }
        agent.epochs_done = ck.meta["epochs_done"].as_u64().unwrap_or(0) as usize;
        Ok((agent, config))
    }
}

/// Per-episode quantities of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSample {
    pub reward: f64,
    pub value: f64,
    pub log_prob: f64,
}

/// Rolls out one sampled episode and adds its scaled actor and critic
/// gradients: `-(R - V)/M · ∇ Σ log p` and `∇ (R - V)² / M`.
pub fn accumulate_episode(
    agent: &mut Agent,
    inst: &NetworkInstance,
    max_steps: Option<usize>,
    rng: &mut ChaCha8Rng,
    batch: usize,
) -> Result<EpisodeSample, TrainError> {
    let mut env = Env::new(inst);
    if let Some(t) = max_steps {
        env = env.with_max_steps(t);
    }
    let mut tape = Tape::new();
    let ro = rollout(&agent.actor, &mut env, &mut tape, Decode::Sample(rng))?;
    let reward = ro.trajectory.total_reward();

    let mut ctape = Tape::new();
    let v = agent.critic.value(&mut ctape, inst)?;
    let value = ctape.value(v).item();
    let advantage = reward - value;
    let m = batch as f64;

    let log_prob = ro.log_prob.map_or(0.0, |lp| tape.value(lp).item());
    if !(advantage.is_finite() && (advantage * advantage).is_finite() && log_prob.is_finite()) {
        return Err(NnError::NonFinite {
            param: "loss".into(),
        }
        .into());
    }
    if let Some(lp) = ro.log_prob {
        let loss = tape.scale(lp, -advantage / m);
        tape.backward(loss, &mut agent.actor.store)
            .map_err(PolicyError::from)?;
    }
    let target = ctape.constant(Matrix::scalar(reward));
    let diff = ctape.sub(v, target);
    let sq = ctape.square(diff);
    let loss = ctape.scale(sq, 1.0 / m);
    ctape
        .backward(loss, &mut agent.critic.store)
        .map_err(PolicyError::from)?;
    Ok(EpisodeSample {
        reward,
        value,
        log_prob,
    })
}

/// A finished episode kept for replay with its actions fixed.
#[derive(Debug, Clone)]
pub struct ReplayEpisode {
    pub instance: NetworkInstance,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub value: f64,
}

impl ReplayEpisode {
    /// Samples an episode from `actor` and scores it with `critic`.
    pub fn sample(
        actor: &ActorNet,
        critic: &CriticNet,
        instance: NetworkInstance,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, TrainError> {
        let mut env = Env::new(&instance);
        let mut tape = Tape::new();
        let ro = rollout(actor, &mut env, &mut tape, Decode::Sample(rng))?;
        let actions = ro.trajectory.decisions().map(|d| d.action).collect();
        let reward = ro.trajectory.total_reward();
        let value = critic.predict(&instance)?;
        Ok(Self {
            instance,
            actions,
            reward,
            value,
        })
    }
}

/// Summed log-probability of replaying `actions` on `instance`.
pub fn sequence_log_prob(
    actor: &ActorNet,
    instance: &NetworkInstance,
    actions: &[usize],
) -> Result<f64, TrainError> {
    let mut env = Env::new(instance);
    let mut tape = Tape::new();
    let ro = rollout(actor, &mut env, &mut tape, Decode::Forced(actions))?;
    Ok(ro.log_prob.map_or(0.0, |lp| tape.value(lp).item()))
}

/// Adds `-(R - V)/M · ∇ Σ log p` over `episodes` to the actor gradients.
pub fn actor_gradient(actor: &mut ActorNet, episodes: &[ReplayEpisode]) -> Result<(), TrainError> {
    let m = episodes.len() as f64;
    for ep in episodes {
        let mut env = Env::new(&ep.instance);
        let mut tape = Tape::new();
        let ro = rollout(actor, &mut env, &mut tape, Decode::Forced(&ep.actions))?;
        if let Some(lp) = ro.log_prob {
            let loss = tape.scale(lp, -(ep.reward - ep.value) / m);
            tape.backward(loss, &mut actor.store)
                .map_err(PolicyError::from)?;
        }
    }
    Ok(())
}

/// Adds `∇ (V - R)²/M` over `episodes` to the critic gradients and returns
/// the mean squared advantage under the current critic.
pub fn critic_gradient(
    critic: &mut CriticNet,
    episodes: &[ReplayEpisode],
) -> Result<f64, TrainError> {
    let m = episodes.len() as f64;
    let mut total = 0.0;
    for ep in episodes {
        let mut tape = Tape::new();
        let v = critic.value(&mut tape, &ep.instance)?;
        let target = tape.constant(Matrix::scalar(ep.reward));
        let diff = tape.sub(v, target);
        total += tape.value(diff).item().powi(2);
        let sq = tape.square(diff);
        let loss = tape.scale(sq, 1.0 / m);
        tape.backward(loss, &mut critic.store)
            .map_err(PolicyError::from)?;
    }
    Ok(total / m)
}

fn clip(store: &mut ParamStore, max_norm: Option<f64>) {
    if let Some(max) = max_norm {
        let norm = store.grad_norm();
        if norm > max {
            store.scale_grads(max / norm);
        }
    }
}

/// Runs one epoch: `batch` sampled episodes, then one optimizer step for
/// actor and critic.
pub fn train_epoch(agent: &mut Agent, config: &TrainConfig) -> Result<EpochStats, TrainError> {
    let start = Instant::now();
    let epoch = agent.epochs_done;
    agent.actor.store.zero_grads();
    agent.critic.store.zero_grads();
    let mut samples = Vec::with_capacity(config.batch);
    for m in 0..config.batch {
        let inst = config.episode_instance(epoch, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64, m as u64, 1));
        samples.push(accumulate_episode(
            agent,
            &inst,
            config.max_steps,
            &mut rng,
            config.batch,
        )?);
    }
    clip(&mut agent.actor.store, config.grad_clip);
    clip(&mut agent.critic.store, config.grad_clip);
    agent.actor_opt.step(&mut agent.actor.store)?;
    agent.critic_opt.step(&mut agent.critic.store)?;
    agent.epochs_done += 1;
    let m = samples.len() as f64;
    Ok(EpochStats {
        epoch,
        mean_reward: samples.iter().map(|s| s.reward).sum::<f64>() / m,
        mean_advantage: samples.iter().map(|s| s.reward - s.value).sum::<f64>() / m,
        critic_loss: samples
            .iter()
            .map(|s| (s.reward - s.value).powi(2))
            .sum::<f64>()
            / m,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Shifts the critic's output bias by the mean advantage of one batch
/// sampled from the current actor, so early advantages are centred instead
/// of carrying the full return. Returns the shift.
pub fn warm_start_critic(agent: &mut Agent, config: &TrainConfig) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for m in 0..config.batch {
        let inst = config.episode_instance(0, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0, m as u64, 2));
        let ep = ReplayEpisode::sample(&agent.actor, &agent.critic, inst, &mut rng)?;
        total += ep.reward - ep.value;
    }
    let shift = total / config.batch as f64;
    let bias = agent
        .critic
        .store
        .find("critic.out.b")
        .ok_or_else(|| TrainError::Config("critic has no output bias".into()))?;
    agent.critic.store.value_mut(bias).data[0] += shift;
    Ok(shift)
}

/// Continues training `agent` for `config.epochs` epochs, calling
/// `on_epoch` after each. On non-finite values the agent is restored to the
/// last good state, which is also written to the checkpoint directory.
pub fn train_agent(
    agent: &mut Agent,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainStats, TrainError> {
    config.validate()?;
    if config.critic_warm_start && agent.epochs_done == 0 {
        warm_start_critic(agent, config)?;
    }
    let mut stats = TrainStats::default();
    for _ in 0..config.epochs {
        let good = agent.clone();
        let epoch = agent.epochs_done;
        match train_epoch(agent, config) {
            Ok(s) => {
                on_epoch(&s);
                stats.epochs.push(s);
            }
            Err(TrainError::Nn(NnError::NonFinite { .. }))
            | Err(TrainError::Policy(PolicyError::Nn(NnError::NonFinite { .. }))) => {
                *agent = good;
                let saved = match &config.checkpoint_dir {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        let path = dir.join("last_good.json");
                        agent.save(config, &path)?;
                        Some(path)
                    }
                    None => None,
                };
                return Err(TrainError::NonFinite { epoch, saved });
            }
            Err(e) => return Err(e),
        }
        if let (Some(k), Some(dir)) = (config.checkpoint_every, &config.checkpoint_dir) {
            if agent.epochs_done.is_multiple_of(k) {
                std::fs::create_dir_all(dir)?;
                agent.save(
                    config,
                    &dir.join(format!("epoch_{:05}.json", agent.epochs_done)),
                )?;
            }
        }
    }
    Ok(stats)
}

/// Trains a fresh agent from `config`.
pub fn train(config: &TrainConfig) -> Result<(Agent, TrainStats), TrainError> {
    config.validate()?;
    let mut agent = Agent::new(config);
    let stats = train_agent(&mut agent, config, |_| {})?;
    Ok((agent, stats))
}

/// Twin runs with and without the distance feature under one seed.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub with_distance: (Agent, TrainStats),
    pub without_distance: (Agent, TrainStats),
}

pub fn ablate_distance_feature(config: &TrainConfig) -> Result<Ablation, TrainError> {
    let with = TrainConfig {
        distance: true,
        ..config.clone()
    };
    let without = TrainConfig {
        distance: false,
        ..config.clone()
    };
    Ok(Ablation {
        with_distance: train(&with)?,
        without_distance: train(&without)?,
    })
}
