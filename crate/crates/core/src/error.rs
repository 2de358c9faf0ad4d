use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0} absent")]
    MissingField(&'static str),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelocationError {
    #[error("no open demander is left to receive an EV")]
    NoOpenDemander,
    #[error("no charger is currently available")]
    NoChargerAvailable,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("shuttle {0} does not exist")]
    UnknownShuttle(usize),
    #[error("shuttle {shuttle} already has an action in flight")]
    ShuttleBusy { shuttle: usize },
    #[error("node {node} is not a legal action for shuttle {shuttle}")]
    Infeasible { shuttle: usize, node: usize },
    #[error("episode is already finished")]
    EpisodeOver,
    #[error("no shuttle can act and no event is pending at clock {clock}")]
    Deadlock { clock: f64 },
    #[error(transparent)]
    Relocation(#[from] RelocationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {0}")]
    LimitsExceeded(String),
    #[error("search aborted after expanding {0} states")]
    Budget(u64),
    #[error(transparent)]
    Sim(#[from] SimError),
}
