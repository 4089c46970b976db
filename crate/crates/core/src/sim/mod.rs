//! Deterministic discrete-event simulation tying the network, the agents,
//! the message fabric and the knowledge base together.

mod config;
mod engine;
mod logs;
mod scenario;

pub use config::SimConfig;
pub use engine::{run, RunResult, SettingsMode, Simulation};
pub use logs::{parse_log, LogFile, Metrics, SIM_AGENT};
pub use scenario::{load_scenario, parse_scenario, DgChange, SimEvent, SimEventKind};

use thiserror::Error;

use crate::adaptive::AdaptiveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Knowledge(#[from] AdaptiveError),
    #[error("settings: {0}")]
    Settings(String),
}
