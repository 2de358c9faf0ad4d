//! Nightly EV rebalancing: instances, simulator, relocation rules and
//! reference routing policies.

pub mod baseline;
pub mod error;
pub mod event;
pub mod instance;
pub mod oracle;
pub mod relocation;
pub mod sim;
pub mod trajectory;

pub use baseline::{greedy_baseline, random_rollout};
pub use error::{InstanceError, OracleError, RelocationError, SimError};
pub use event::{DelayedEvent, EventKind};
pub use instance::{
    generate_instance, generate_with_counts, load_instance, save_instance, Difficulty, FleetConfig,
    NetworkInstance, Node, NodeRole, RoleCounts,
};
pub use oracle::{oracle_optimal, OracleLimits, OracleSolution};
pub use sim::{Env, ObsConfig, Observation, ShuttleState, StepOutcome, DEPOT};
pub use trajectory::{episode_makespan, run_episode, Decision, StepRecord, Trajectory};
