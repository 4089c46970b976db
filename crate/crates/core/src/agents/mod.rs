//! Terminal, regional and central agents as deterministic state machines.
//!
//! Agents never touch each other or the network directly. Every handler
//! returns an [`Actions`] bundle that the simulator applies: log records,
//! outgoing messages, timers and changes to the electrical network.

mod branch;
mod central;
mod dg;
mod regional;
pub mod relay;

pub use branch::{BranchAgent, BranchAgentDb, BreakerStatus, Position, SubState};
pub use central::{CentralAgent, CentralConfig, CentralDb, DgInfo, LoadInfo};
pub use dg::{DgAgent, DgAgentDb, DgConfig};
pub use regional::{RegionalAgent, RegionalDb};
pub use relay::{SettingGroup, Trip};

use std::fmt;

use thiserror::Error;

use crate::comms::{Mode, Payload};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Trip,
    Close,
    Open,
    Reclose,
    Lockout,
    DgOff,
    DgOn,
    DgDispatch,
    Shed,
    GroupChange,
    Fault,
    Cleared,
    Alarm,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::Trip,
        EventKind::Close,
        EventKind::Open,
        EventKind::Reclose,
        EventKind::Lockout,
        EventKind::DgOff,
        EventKind::DgOn,
        EventKind::DgDispatch,
        EventKind::Shed,
        EventKind::GroupChange,
        EventKind::Fault,
        EventKind::Cleared,
        EventKind::Alarm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Trip => "TRIP",
            EventKind::Close => "CLOSE",
            EventKind::Open => "OPEN",
            EventKind::Reclose => "RECLOSE",
            EventKind::Lockout => "LOCKOUT",
            EventKind::DgOff => "DG_OFF",
            EventKind::DgOn => "DG_ON",
            EventKind::DgDispatch => "DG_DISPATCH",
            EventKind::Shed => "SHED",
            EventKind::GroupChange => "GROUP_CHANGE",
            EventKind::Fault => "FAULT",
            EventKind::Cleared => "CLEARED",
            EventKind::Alarm => "ALARM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One event-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEvent {
    pub t: SimTime,
    pub agent: String,
    pub kind: EventKind,
    /// Space separated `key=value` pairs.
    pub detail: String,
}

impl AgentEvent {
    pub fn new(t: SimTime, agent: &str, kind: EventKind, detail: impl Into<String>) -> Self {
        AgentEvent { t, agent: agent.to_string(), kind, detail: detail.into() }
    }

    /// Value of one `key=value` pair in the detail.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail.split(' ').find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}

impl fmt::Display for AgentEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} agent={} event={} detail={}", self.t, self.agent, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub mode: Mode,
    pub payload: Payload,
    pub priority: u8,
}

/// Changes an agent asks the simulator to make to the network.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAction {
    SetBreaker { branch: String, closed: bool },
    SetDg { id: String, online: bool },
    Dispatch { id: String, p: f64, q: f64 },
    ShedLoad { load: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    /// Breaker mechanism finishes moving.
    BreakerOperate,
    /// A timed protection stage may have run out.
    TripDelay,
    /// Dead time before the automatic reclose.
    DeadTime,
    /// End of the post-reclose acceleration window.
    ReclaimWindow,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Actions {
    pub events: Vec<AgentEvent>,
    pub sends: Vec<Outgoing>,
    pub timers: Vec<(SimTime, TimerKind)>,
    pub grid: Vec<GridAction>,
}

impl Actions {
    pub fn extend(&mut self, other: Actions) {
        self.events.extend(other.events);
        self.sends.extend(other.sends);
        self.timers.extend(other.timers);
        self.grid.extend(other.grid);
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && self.sends.is_empty() && self.timers.is_empty() && self.grid.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("measurement for {got} delivered to agent {agent}")]
    WrongBranch { agent: String, got: String },
    #[error("agent {0} has no active setting group")]
    NoActiveGroup(String),
    #[error("instruction is {age_ms} ms old")]
    StaleInstruction { age_ms: u64 },
    #[error("already in the requested state")]
    AlreadyInState,
    #[error("{0} is not a member of this area")]
    NotMember(String),
    #[error("agent {agent} has no setting group {group}")]
    UnknownGroup { agent: String, group: u16 },
    #[error("message is not addressed to {0}")]
    NotAddressed(String),
}

/// Instructions older than this are refused.
pub const INSTRUCTION_MAX_AGE: SimTime = SimTime(500_000);

pub(crate) fn check_fresh(now: SimTime, issued_at: f64) -> Result<(), AgentError> {
    let age = now - SimTime::from_secs(issued_at);
    if age >= INSTRUCTION_MAX_AGE {
        return Err(AgentError::StaleInstruction { age_ms: age.micros() / 1000 });
    }
    Ok(())
}

/// Formats a per-unit value for log details.
pub(crate) fn pu(x: f64) -> String {
    format!("{x:.4}")
}
