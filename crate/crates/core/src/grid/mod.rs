//! Distribution network model and fault engine.

mod measure;
mod network;
mod parse;
mod solve;

pub use measure::{branch_measurement, direction_of, Direction, Measurement, I_NOISE_FLOOR};
pub use network::{Branch, Bus, End, FaultSpec, Load, Network, Source, SourceKind};
pub use parse::{build_network, write_network};
pub use solve::{solve_fault, solve_prefault, FaultSolution, CLAMP_TOLERANCE, MAX_CLAMP_ITERATIONS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("unknown branch {0}")]
    UnknownBranch(String),
    #[error("invalid fault: {0}")]
    InvalidFault(String),
    #[error("fault point is isolated from every source")]
    SingularNetwork,
}
