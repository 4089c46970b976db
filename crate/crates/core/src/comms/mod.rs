//! Message fabric between agents: direct, radio (group broadcast) and
//! blackboard transmission with per-link-class latency and byte accounting.

mod blackboard;
mod codec;
mod fabric;
mod layout;

pub use blackboard::{Blackboard, BlackboardEntry};
pub use codec::{encode_payload, Action, AreaSummary, FieldClass, Payload, StatusDigest, TAG_BYTES};
pub use fabric::{Delivery, Fabric, LatencyConfig, LinkClass, Message, MessageRecord, Recipient};
pub use layout::{AgentLayout, AgentRef, LinkTable, CENTRAL_ID, REGIONAL_GROUP};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentKind {
    TerminalBranch,
    TerminalDg,
    Regional,
    Central,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] =
        [AgentKind::TerminalBranch, AgentKind::TerminalDg, AgentKind::Regional, AgentKind::Central];

    pub fn is_terminal(self) -> bool {
        matches!(self, AgentKind::TerminalBranch | AgentKind::TerminalDg)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::TerminalBranch => "terminal-branch",
            AgentKind::TerminalDg => "terminal-dg",
            AgentKind::Regional => "regional",
            AgentKind::Central => "central",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        AgentKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeRule {
    Direct,
    Radio,
    Blackboard,
    Forbidden,
}

/// The legal transmission mode from one agent layer to another.
pub fn mode_allowed(sender: AgentKind, receiver: AgentKind) -> ModeRule {
    use AgentKind::*;
    let layer = |k: AgentKind| match k {
        TerminalBranch | TerminalDg => 0,
        Regional => 1,
        Central => 2,
    };
    match (layer(sender), layer(receiver)) {
        (0, 0) => ModeRule::Direct,
        (0, 1) => ModeRule::Direct,
        (1, 0) => ModeRule::Radio,
        (1, 1) => ModeRule::Blackboard,
        (1, 2) => ModeRule::Direct,
        (2, 1) => ModeRule::Radio,
        _ => ModeRule::Forbidden,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Direct { dest: String },
    Radio { area: String },
    BlackboardPost { key: String },
}

impl Mode {
    pub fn rule(&self) -> ModeRule {
        match self {
            Mode::Direct { .. } => ModeRule::Direct,
            Mode::Radio { .. } => ModeRule::Radio,
            Mode::BlackboardPost { .. } => ModeRule::Blackboard,
        }
    }

    pub fn log_name(&self) -> &'static str {
        match self {
            Mode::Direct { .. } => "DIRECT",
            Mode::Radio { .. } => "RADIO",
            Mode::BlackboardPost { .. } => "BB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommsError {
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("{sender} -> {receiver} must use {expected:?}, not {attempted:?}")]
    ModeViolation { sender: AgentKind, receiver: AgentKind, expected: ModeRule, attempted: ModeRule },
    #[error("no direct link between {0} and {1}")]
    NoLink(String, String),
    #[error("terminal-to-terminal payload from {0} carries voltage or switch-count fields")]
    SelectivityViolation(String),
    #[error("unknown area {0}")]
    UnknownArea(String),
    #[error("{0} is not a member of group {1}")]
    NotInGroup(String, String),
    #[error("{0} is not a regional agent")]
    NotRegional(String),
}

#[cfg(test)]
mod tests;
