use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blackboard::Blackboard;
use super::codec::{encode_payload, Payload};
use super::layout::AgentLayout;
use super::{mode_allowed, AgentKind, CommsError, Mode, ModeRule};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub seq: u64,
    pub t_send: SimTime,
    pub sender: String,
    pub mode: Mode,
    pub payload: Payload,
    pub priority: u8,
    pub size_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkClass {
    TerminalTerminal,
    TerminalRegional,
    RegionalTerminal,
    RegionalRegional,
    RegionalCentral,
    CentralRegional,
}

impl LinkClass {
    pub fn between(from: AgentKind, to: AgentKind) -> Option<LinkClass> {
        use AgentKind::*;
        Some(match (from, to) {
            (f, t) if f.is_terminal() && t.is_terminal() => LinkClass::TerminalTerminal,
            (f, Regional) if f.is_terminal() => LinkClass::TerminalRegional,
            (Regional, t) if t.is_terminal() => LinkClass::RegionalTerminal,
            (Regional, Regional) => LinkClass::RegionalRegional,
            (Regional, Central) => LinkClass::RegionalCentral,
            (Central, Regional) => LinkClass::CentralRegional,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkClass::TerminalTerminal => "tt",
            LinkClass::TerminalRegional => "tr",
            LinkClass::RegionalTerminal => "rt",
            LinkClass::RegionalRegional => "rr",
            LinkClass::RegionalCentral => "rc",
            LinkClass::CentralRegional => "cr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyConfig {
    pub terminal_terminal: SimTime,
    pub terminal_regional: SimTime,
    pub regional_central: SimTime,
    pub blackboard: SimTime,
    /// Seed for the optional uniform 0-1 ms jitter.
    pub jitter_seed: Option<u64>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            terminal_terminal: SimTime::from_millis(1.0),
            terminal_regional: SimTime::from_millis(2.0),
            regional_central: SimTime::from_millis(2.0),
            blackboard: SimTime::from_millis(2.0),
            jitter_seed: None,
        }
    }
}

impl LatencyConfig {
    fn of(&self, class: LinkClass) -> SimTime {
        match class {
            LinkClass::TerminalTerminal => self.terminal_terminal,
            LinkClass::TerminalRegional | LinkClass::RegionalTerminal => self.terminal_regional,
            LinkClass::RegionalCentral | LinkClass::CentralRegional => self.regional_central,
            LinkClass::RegionalRegional => self.blackboard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Recipient {
    Agent(String),
    Blackboard(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub arrival: SimTime,
    pub to: Recipient,
    pub class: LinkClass,
    pub msg: Message,
}

/// One line of the message log, written at delivery time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub t: SimTime,
    pub seq: u64,
    pub mode: &'static str,
    pub from: String,
    pub to: String,
    pub tag: &'static str,
    pub bytes: usize,
}

impl fmt::Display for MessageRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} seq={} mode={} from={} to={} type={} bytes={}",
            self.t, self.seq, self.mode, self.from, self.to, self.tag, self.bytes
        )
    }
}

impl Delivery {
    pub fn record(&self) -> MessageRecord {
        let to = match &self.to {
            Recipient::Agent(id) => id.clone(),
            Recipient::Blackboard(key) => key.clone(),
        };
        MessageRecord {
            t: self.arrival,
            seq: self.msg.seq,
            mode: self.msg.mode.log_name(),
            from: self.msg.sender.clone(),
            to,
            tag: self.msg.payload.tag(),
            bytes: self.msg.size_bytes,
        }
    }
}

/// The mode-checked message fabric. Owned by one simulation loop.
#[derive(Debug, Clone)]
pub struct Fabric {
    layout: AgentLayout,
    latency: LatencyConfig,
    jitter: Option<ChaCha8Rng>,
    next_seq: u64,
    /// Keyed by (arrival, seq, fan-out index).
    queue: BTreeMap<(SimTime, u64, usize), Delivery>,
    blackboard: Blackboard,
}

impl Fabric {
    pub fn new(layout: AgentLayout, latency: LatencyConfig) -> Fabric {
        let jitter = latency.jitter_seed.map(ChaCha8Rng::seed_from_u64);
        Fabric { layout, latency, jitter, next_seq: 0, queue: BTreeMap::new(), blackboard: Blackboard::new() }
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    pub fn blackboard(&self) -> &Blackboard {
        &self.blackboard
    }

    fn kind(&self, id: &str) -> Result<AgentKind, CommsError> {
        self.layout.kind(id).ok_or_else(|| CommsError::UnknownAgent(id.to_string()))
    }

    fn check(expected: ModeRule, attempted: &Mode, sender: AgentKind, receiver: AgentKind) -> Result<(), CommsError> {
        if expected != attempted.rule() {
            return Err(CommsError::ModeViolation { sender, receiver, expected, attempted: attempted.rule() });
        }
        Ok(())
    }

    /// Validates a message against the mode rules and link table and queues
    /// its deliveries. Returns the assigned sequence number.
    pub fn send(
        &mut self,
        t: SimTime,
        sender: &str,
        mode: Mode,
        payload: Payload,
        priority: u8,
    ) -> Result<u64, CommsError> {
        let sk = self.kind(sender)?;
        let mut targets: Vec<(Recipient, LinkClass)> = Vec::new();
        match &mode {
            Mode::Direct { dest } => {
                let dk = self.kind(dest)?;
                Self::check(mode_allowed(sk, dk), &mode, sk, dk)?;
                if !self.layout.links.linked(sender, dest) {
                    return Err(CommsError::NoLink(sender.to_string(), dest.clone()));
                }
                if sk.is_terminal() && dk.is_terminal() && payload.carries_voltage_or_switch_count() {
                    return Err(CommsError::SelectivityViolation(sender.to_string()));
                }
                targets.push((Recipient::Agent(dest.clone()), LinkClass::between(sk, dk).expect("allowed pair")));
            }
            Mode::Radio { area } => {
                let group =
                    self.layout.links.groups.get(area).ok_or_else(|| CommsError::UnknownArea(area.clone()))?;
                if !group.iter().any(|m| m == sender) {
                    return Err(CommsError::NotInGroup(sender.to_string(), area.clone()));
                }
                for member in group.iter().filter(|m| *m != sender) {
                    let mk = self.kind(member)?;
                    Self::check(mode_allowed(sk, mk), &mode, sk, mk)?;
                    targets.push((Recipient::Agent(member.clone()), LinkClass::between(sk, mk).expect("allowed pair")));
                }
            }
            Mode::BlackboardPost { key } => {
                if sk != AgentKind::Regional {
                    return Err(CommsError::NotRegional(sender.to_string()));
                }
                targets.push((Recipient::Blackboard(key.clone()), LinkClass::RegionalRegional));
            }
        }

        let seq = self.next_seq;
        self.next_seq += 1;
        let msg = Message {
            seq,
            t_send: t,
            sender: sender.to_string(),
            mode,
            size_bytes: encode_payload(&payload),
            payload,
            priority,
        };
        for (k, (to, class)) in targets.into_iter().enumerate() {
            let mut arrival = t + self.latency.of(class);
            if let Some(rng) = self.jitter.as_mut() {
                arrival = arrival + SimTime(rng.gen_range(0..=1000));
            }
            self.queue.insert((arrival, seq, k), Delivery { arrival, to, class, msg: msg.clone() });
        }
        Ok(seq)
    }

    pub fn next_arrival(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|k| k.0)
    }

    /// Distinct arrival times still queued.
    pub fn arrivals(&self) -> BTreeSet<SimTime> {
        self.queue.keys().map(|k| k.0).collect()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Pops every delivery due by `now`, in (arrival, seq) order. Blackboard
    /// posts are applied to the board as they are delivered.
    pub fn deliver(&mut self, now: SimTime) -> Vec<Delivery> {
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > now {
                break;
            }
            let d = entry.remove();
            if let Recipient::Blackboard(key) = &d.to {
                let kind = self.layout.kind(&d.msg.sender).unwrap_or(AgentKind::Regional);
                // Sender kind was checked at send time.
                let _ = self.blackboard.post(key, d.msg.payload.clone(), d.msg.priority, &d.msg.sender, kind, d.arrival);
            }
            out.push(d);
        }
        out
    }
}
