//! Relay-point measurements derived from a network solution.

use std::fmt;

use num_complex::Complex64;

use super::network::{End, Network};
use super::solve::FaultSolution;
use super::GridError;

/// Below this current magnitude (pu) the direction is undetermined.
pub const I_NOISE_FLOOR: f64 = 1e-6;

/// Relay characteristic angle of the directional element, in degrees.
pub const CHARACTERISTIC_ANGLE_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Undetermined,
    Forward,
    Reverse,
}

impl Direction {
    /// One-byte status code carried in digests.
    pub fn code(self) -> u8 {
        match self {
            Direction::Undetermined => 0x00,
            Direction::Forward => 0x01,
            Direction::Reverse => 0x02,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x00 => Some(Direction::Undetermined),
            0x01 => Some(Direction::Forward),
            0x02 => Some(Direction::Reverse),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Undetermined => "undetermined",
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub branch_id: String,
    pub end: End,
    pub i_mag: [f64; 3],
    pub v_mag: [f64; 3],
    pub direction: Direction,
    /// Simulation time in seconds.
    pub t: f64,
}

/// Direction of a current flowing into the line at the relay.
///
/// The element is polarised by the pre-fault (memory) voltage, which is
/// 1.0∠0° under the flat-profile convention, and operates forward when the
/// current lies within ±90° of the characteristic angle behind it. Memory
/// polarisation keeps close-in bolted faults (zero local voltage) decidable.
pub fn direction_of(i_into_line: Complex64) -> Direction {
    if i_into_line.norm() < I_NOISE_FLOOR {
        return Direction::Undetermined;
    }
    let v_mem = Complex64::new(1.0, 0.0);
    let rca = Complex64::from_polar(1.0, -CHARACTERISTIC_ANGLE_DEG.to_radians());
    let torque = (v_mem * i_into_line.conj() * rca).re;
    if torque >= 0.0 {
        Direction::Forward
    } else {
        Direction::Reverse
    }
}

pub fn branch_measurement(
    net: &Network,
    sol: &FaultSolution,
    branch_id: &str,
    end: End,
    t: f64,
) -> Result<Measurement, GridError> {
    let br = net.branch(branch_id).ok_or_else(|| GridError::UnknownBranch(branch_id.to_string()))?;
    let i = sol.current(branch_id, end).ok_or_else(|| GridError::UnknownBranch(branch_id.to_string()))?;
    let (bus, into_line) = match end {
        End::From => (&br.from_bus, i),
        End::To => (&br.to_bus, -i),
    };
    let v = sol.voltage(bus).unwrap_or_default().norm();
    let im = i.norm();
    Ok(Measurement {
        branch_id: branch_id.to_string(),
        end,
        i_mag: [im; 3],
        v_mag: [v; 3],
        direction: direction_of(into_line),
        t,
    })
}
