use std::path::PathBuf;

use ffevss_core::{InstanceError, SimError};
use ffevss_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("single-shuttle rollout on an instance with {0} shuttles")]
    NotSingleShuttle(usize),
    #[error("forced action list exhausted after {0} decisions")]
    ForcedExhausted(usize),
    #[error("forced action {action} is not legal for shuttle {shuttle}")]
    ForcedIllegal { shuttle: usize, action: usize },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("non-finite values at epoch {epoch}; last good state {}", saved.as_ref().map_or("not saved".to_string(), |p| p.display().to_string()))]
    NonFinite {
        epoch: usize,
        saved: Option<PathBuf>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SimError> for TrainError {
    fn from(e: SimError) -> Self {
        TrainError::Policy(PolicyError::Sim(e))
    }
}
