//! Routing policy, critic, REINFORCE trainer and evaluation helpers.

pub mod actor;
pub mod critic;
pub mod error;
pub mod eval;
pub mod trainer;

pub use actor::{
    argmax, greedy_inference, rollout, rollout_fleet, rollout_single, ActOutput, ActorNet, Decode,
    Episode, Rollout, HIDDEN,
};
pub use critic::CriticNet;
pub use error::{PolicyError, TrainError};
pub use eval::{
    evaluate, evaluate_greedy_baseline, evaluate_random, held_out, mean_makespan, win_pct,
    EpisodeResult, HELD_OUT_SEED,
};
pub use trainer::{
    ablate_distance_feature, accumulate_episode, actor_gradient, critic_gradient,
    sequence_log_prob, train, train_agent, train_epoch, warm_start_critic, Ablation, Agent,
    EpisodeSample, EpochStats, Flavor, ReplayEpisode, TrainConfig, TrainStats, TRAIN_SEED_BIT,
};
