//! Message payloads and their wire-size accounting.
//!
//! Every field belongs to one width class: status/flag fields take one byte,
//! identifiers and counters two, analog values eight. Each payload adds a
//! one-byte type tag.

use std::fmt;

use crate::grid::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldClass {
    Status,
    Id,
    Analog,
}

impl FieldClass {
    pub fn width(self) -> usize {
        match self {
            FieldClass::Status => 1,
            FieldClass::Id => 2,
            FieldClass::Analog => 8,
        }
    }
}

pub const TAG_BYTES: usize = 1;

/// Breaker status byte: bit 0 = closed, bits 1-2 = sub-state.
pub type StatusByte = u8;

#[derive(Debug, Clone, PartialEq)]
pub struct StatusDigest {
    /// Branch id, or DG id when sent by a DG agent.
    pub element_id: String,
    pub breaker_status: StatusByte,
    pub direction: Direction,
    /// Representative phase-a current magnitude (DG agents: active output).
    pub i_mag_a: f64,
    /// Only allowed towards the regional agent.
    pub v_mag: Option<f64>,
    /// Only allowed towards the regional agent.
    pub switch_count: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    OpenBreaker,
    CloseBreaker,
    DisconnectDg,
    ConnectDg,
}

impl Action {
    pub fn code(self) -> u8 {
        match self {
            Action::OpenBreaker => 1,
            Action::CloseBreaker => 2,
            Action::DisconnectDg => 3,
            Action::ConnectDg => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaSummary {
    pub area: String,
    /// Online flags of the DGs reporting to this area, bit i = i-th DG by id.
    pub dg_bits: u16,
    pub p_load: f64,
    pub p_gen: f64,
    pub min_v: f64,
    pub min_v_bus: String,
    pub trips: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    StatusDigest(StatusDigest),
    TripNotice { branch_id: String, stage: u8 },
    Instruction { target: String, action: Action, issued_at: f64 },
    SettingGroupUpdate { target: String, group_id: u16, vector: u16 },
    AreaSummary(AreaSummary),
    DgDispatch { target: String, p: f64, q: f64, issued_at: f64 },
    LoadShedOrder { load_id: String, issued_at: f64 },
}

impl Payload {
    pub fn tag(&self) -> &'static str {
        match self {
            Payload::StatusDigest(_) => "STATUS",
            Payload::TripNotice { .. } => "TRIP_NOTICE",
            Payload::Instruction { .. } => "INSTRUCTION",
            Payload::SettingGroupUpdate { .. } => "GROUP_UPDATE",
            Payload::AreaSummary(_) => "AREA_SUMMARY",
            Payload::DgDispatch { .. } => "DG_DISPATCH",
            Payload::LoadShedOrder { .. } => "LOAD_SHED",
        }
    }

    /// Field layout after the type tag.
    pub fn fields(&self) -> Vec<FieldClass> {
        use FieldClass::*;
        match self {
            Payload::StatusDigest(d) => {
                let mut f = vec![Id, Status, Status, Analog];
                if d.v_mag.is_some() {
                    f.push(Analog);
                }
                if d.switch_count.is_some() {
                    f.push(Id);
                }
                f
            }
            Payload::TripNotice { .. } => vec![Id, Status],
            Payload::Instruction { .. } => vec![Id, Status, Analog],
            Payload::SettingGroupUpdate { .. } => vec![Id, Id, Id],
            Payload::AreaSummary(_) => vec![Id, Id, Analog, Analog, Analog, Id, Status],
            Payload::DgDispatch { .. } => vec![Id, Analog, Analog, Analog],
            Payload::LoadShedOrder { .. } => vec![Id, Analog],
        }
    }

    /// Carries fields that are useless to a peer terminal agent.
    pub fn carries_voltage_or_switch_count(&self) -> bool {
        matches!(self, Payload::StatusDigest(d) if d.v_mag.is_some() || d.switch_count.is_some())
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Deterministic encoded size in bytes.
pub fn encode_payload(payload: &Payload) -> usize {
    TAG_BYTES + payload.fields().iter().map(|c| c.width()).sum::<usize>()
}
