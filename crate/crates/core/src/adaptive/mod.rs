//! Offline setting study: one coordinated setting group per branch for every
//! on/off combination of the distributed generators.

mod kb;
mod settings;
mod verify;

pub use kb::{build_knowledge, KnowledgeBase};
pub use settings::{compute_settings, Infeasible};
pub use verify::{verify_selectivity, Violation};

use thiserror::Error;

use crate::grid::Network;

/// Largest DG count for which the full table is built.
pub const MAX_DGS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptiveError {
    #[error("{0} DGs exceed the limit of {MAX_DGS}")]
    TooManyDgs(usize),
    #[error("vector {bits} is infeasible: {reason}")]
    InfeasibleVector { bits: String, reason: String },
    #[error("vector {0} is not in the knowledge base")]
    MissingVector(String),
    #[error("knowledge base was built for network {expected}, running network is {found}")]
    HashMismatch { expected: String, found: String },
    #[error("knowledge base line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Coordination constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordConfig {
    pub k_rel: f64,
    pub k_coord: f64,
    pub grading_s: f64,
    pub load_factor: f64,
    pub sensitivity_floor: f64,
    pub tms_min: f64,
    pub tms_max: f64,
    pub dead_time: f64,
    pub alpha: f64,
    pub cycle_s: f64,
    pub breaker_s: f64,
    pub positions: Vec<f64>,
    /// How long the verifier watches each fault.
    pub verify_horizon_s: f64,
}

impl Default for CoordConfig {
    fn default() -> Self {
        CoordConfig {
            k_rel: 1.3,
            k_coord: 1.1,
            grading_s: 0.3,
            load_factor: 1.2,
            sensitivity_floor: 0.1,
            tms_min: 0.1,
            tms_max: 1.5,
            dead_time: 0.5,
            alpha: crate::agents::relay::DEFAULT_ALPHA,
            cycle_s: 0.01,
            breaker_s: 0.04,
            positions: vec![0.1, 0.5, 0.9],
            verify_horizon_s: 5.0,
        }
    }
}

/// On/off status of every DG, ordered by DG id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DgStatusVector {
    pub status: Vec<(String, bool)>,
}

impl DgStatusVector {
    /// Current online flags of `net`.
    pub fn of(net: &Network) -> Self {
        DgStatusVector { status: net.dgs().iter().map(|s| (s.id.clone(), s.online)).collect() }
    }

    /// `1` per online DG, first DG first; `-` when there are no DGs.
    pub fn bits(&self) -> String {
        if self.status.is_empty() {
            return "-".into();
        }
        self.status.iter().map(|(_, on)| if *on { '1' } else { '0' }).collect()
    }

    /// The bit string read as a binary number.
    pub fn index(&self) -> u16 {
        self.status.iter().fold(0u16, |acc, (_, on)| (acc << 1) | u16::from(*on))
    }

    pub fn from_bits(net: &Network, bits: &str) -> Option<Self> {
        let ids: Vec<String> = net.dgs().iter().map(|s| s.id.clone()).collect();
        if bits == "-" && ids.is_empty() {
            return Some(DgStatusVector { status: vec![] });
        }
        if bits.len() != ids.len() || !bits.chars().all(|c| c == '0' || c == '1') {
            return None;
        }
        Some(DgStatusVector { status: ids.into_iter().zip(bits.chars().map(|c| c == '1')).collect() })
    }

    pub fn apply(&self, net: &Network) -> Network {
        let mut out = net.clone();
        for (id, on) in &self.status {
            if let Some(s) = out.source_mut(id) {
                s.online = *on;
            }
        }
        out
    }
}

/// All 2^n vectors, counting in binary with the first DG as the top bit.
pub fn enumerate_vectors(net: &Network) -> Result<Vec<DgStatusVector>, AdaptiveError> {
    let ids: Vec<String> = net.dgs().iter().map(|s| s.id.clone()).collect();
    let n = ids.len();
    if n > MAX_DGS {
        return Err(AdaptiveError::TooManyDgs(n));
    }
    Ok((0..1u32 << n)
        .map(|k| DgStatusVector {
            status: ids.iter().enumerate().map(|(i, id)| (id.clone(), (k >> (n - 1 - i)) & 1 == 1)).collect(),
        })
        .collect())
}
