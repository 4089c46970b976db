//! Branch (breaker) terminal agent: collect, preprocess, analyze, act.

use std::collections::BTreeMap;

use super::relay::{decide, RelayCore, SettingGroup, Trip};
use super::{check_fresh, pu, Actions, AgentError, AgentEvent, EventKind, GridAction, Outgoing, TimerKind};
use crate::comms::{Action, Mode, Payload, StatusDigest};
use crate::grid::{Direction, Measurement};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubState {
    Normal,
    Reclosing,
    ManualOperation,
    LockedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BreakerStatus {
    pub position: Position,
    pub sub_state: SubState,
}

impl BreakerStatus {
    /// Bit 0 closed, bits 1-2 sub-state.
    pub fn byte(self) -> u8 {
        let sub = match self.sub_state {
            SubState::Normal => 0,
            SubState::Reclosing => 1,
            SubState::ManualOperation => 2,
            SubState::LockedOut => 3,
        };
        u8::from(self.position == Position::Closed) | (sub << 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchAgentDb {
    pub branch_id: String,
    pub breaker: BreakerStatus,
    pub i_mag: [f64; 3],
    pub v_mag: [f64; 3],
    pub direction: Direction,
    pub active_group: u16,
    pub groups: BTreeMap<u16, SettingGroup>,
    pub events: Vec<AgentEvent>,
    pub switch_count: u32,
    pub neighbor_digests: BTreeMap<String, StatusDigest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cause {
    Protection,
    Manual,
    Instruction,
}

impl Cause {
    fn as_str(self) -> &'static str {
        match self {
            Cause::Protection => "protection",
            Cause::Manual => "manual",
            Cause::Instruction => "instruction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchAgent {
    pub db: BranchAgentDb,
    pub relay: RelayCore,
    /// Regional agent this branch reports to.
    pub home: String,
    /// Adjacent branch agents with a direct link.
    pub peers: Vec<String>,
    /// Loads on this branch's far bus, which it can shed.
    pub loads: Vec<String>,
    pub breaker_time: SimTime,
    /// Post-reclose window in which any pickup trips at once.
    pub reclaim: SimTime,
    staged: Option<Measurement>,
    opening: Option<SimTime>,
    reclose_at: Option<SimTime>,
    window_until: Option<SimTime>,
    last_due: Option<SimTime>,
    picked_up: bool,
    last_update: Option<(u16, u16)>,
}

impl BranchAgent {
    pub fn new(id: &str, groups: BTreeMap<u16, SettingGroup>, active_group: u16, home: &str) -> Self {
        BranchAgent {
            db: BranchAgentDb {
                branch_id: id.to_string(),
                breaker: BreakerStatus { position: Position::Closed, sub_state: SubState::Normal },
                i_mag: [0.0; 3],
                v_mag: [1.0; 3],
                direction: Direction::Undetermined,
                active_group,
                groups,
                events: Vec::new(),
                switch_count: 0,
                neighbor_digests: BTreeMap::new(),
            },
            relay: RelayCore::default(),
            home: home.to_string(),
            peers: Vec::new(),
            loads: Vec::new(),
            breaker_time: SimTime::from_millis(40.0),
            reclaim: SimTime::from_millis(200.0),
            staged: None,
            opening: None,
            reclose_at: None,
            window_until: None,
            last_due: None,
            picked_up: false,
            last_update: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.db.branch_id
    }

    pub fn group(&self) -> Result<&SettingGroup, AgentError> {
        self.db.groups.get(&self.db.active_group).ok_or_else(|| AgentError::NoActiveGroup(self.id().to_string()))
    }

    fn log(&mut self, acts: &mut Actions, t: SimTime, kind: EventKind, detail: String) {
        let e = AgentEvent::new(t, &self.db.branch_id, kind, detail);
        self.db.events.push(e.clone());
        acts.events.push(e);
    }

    pub fn collect(&mut self, m: Measurement) -> Result<(), AgentError> {
        if m.branch_id != self.db.branch_id {
            return Err(AgentError::WrongBranch { agent: self.id().to_string(), got: m.branch_id });
        }
        self.staged = Some(m);
        Ok(())
    }

    /// Filters the staged measurement into the database.
    pub fn preprocess(&mut self) {
        if let Some(m) = self.staged.take() {
            self.relay.filter(m.i_mag);
            self.db.i_mag = self.relay.filtered;
            self.db.v_mag = m.v_mag;
            self.db.direction = m.direction;
        }
    }

    pub fn analyze(&self) -> Result<Option<Trip>, AgentError> {
        Ok(decide(self.group()?, self.relay.current(), self.db.direction))
    }

    fn closed(&self) -> bool {
        self.db.breaker.position == Position::Closed
    }

    fn digest(&self, with_local: bool) -> StatusDigest {
        StatusDigest {
            element_id: self.db.branch_id.clone(),
            breaker_status: self.db.breaker.byte(),
            direction: self.db.direction,
            i_mag_a: self.db.i_mag[0],
            v_mag: with_local.then_some(self.db.v_mag[0]),
            switch_count: with_local.then_some(self.db.switch_count),
        }
    }

    fn tell_peers(&self, acts: &mut Actions) {
        for p in &self.peers {
            acts.sends.push(Outgoing {
                mode: Mode::Direct { dest: p.clone() },
                payload: Payload::StatusDigest(self.digest(false)),
                priority: 1,
            });
        }
    }

    fn tell_home(&self, acts: &mut Actions) {
        acts.sends.push(Outgoing {
            mode: Mode::Direct { dest: self.home.clone() },
            payload: Payload::StatusDigest(self.digest(true)),
            priority: 1,
        });
    }

    /// One measurement cycle: collect, preprocess, analyze, and trip if due.
    pub fn measure_cycle(&mut self, now: SimTime, m: Measurement) -> Result<Actions, AgentError> {
        self.collect(m)?;
        self.preprocess();
        let mut acts = Actions::default();
        if !self.closed() || self.opening.is_some() {
            return Ok(acts);
        }
        let decision = self.analyze()?;
        if decision.is_some() != self.picked_up {
            self.picked_up = decision.is_some();
            self.tell_peers(&mut acts);
        }
        if let (Some(d), Some(_)) = (decision, self.window_until) {
            self.trip(now, d.stage, true, &mut acts);
            return Ok(acts);
        }
        if let Some(stage) = self.relay.arm(now, decision) {
            self.trip(now, stage, false, &mut acts);
        } else {
            let due = self.relay.pending.map(|p| p.due());
            if due != self.last_due {
                if let Some(d) = due {
                    acts.timers.push((d, TimerKind::TripDelay));
                }
            }
            self.last_due = due;
        }
        Ok(acts)
    }

    fn trip(&mut self, now: SimTime, stage: u8, accelerated: bool, acts: &mut Actions) {
        self.relay.pending = None;
        self.last_due = None;
        let mut detail = format!("stage={stage} i={} group={}", pu(self.relay.current()), self.db.active_group);
        if accelerated {
            detail.push_str(" accel=1");
        }
        self.log(acts, now, EventKind::Trip, detail);
        let due = now + self.breaker_time;
        self.opening = Some(due);
        acts.timers.push((due, TimerKind::BreakerOperate));
        acts.sends.push(Outgoing {
            mode: Mode::Direct { dest: self.home.clone() },
            payload: Payload::TripNotice { branch_id: self.db.branch_id.clone(), stage },
            priority: 2,
        });
    }

    fn open(&mut self, now: SimTime, cause: Cause, acts: &mut Actions) {
        self.db.breaker.position = Position::Open;
        self.db.switch_count += 1;
        self.relay.reset();
        self.picked_up = false;
        acts.grid.push(GridAction::SetBreaker { branch: self.db.branch_id.clone(), closed: false });
        self.log(acts, now, EventKind::Open, format!("cause={} count={}", cause.as_str(), self.db.switch_count));
        let reclose = self.group().map(|g| (g.reclose_enabled, g.dead_time)).unwrap_or((false, 0.0));
        match cause {
            Cause::Protection if self.window_until.is_some() => {
                self.window_until = None;
                self.db.breaker.sub_state = SubState::LockedOut;
                self.log(acts, now, EventKind::Lockout, "reason=reclose_failed".to_string());
            }
            Cause::Protection if reclose.0 => {
                self.db.breaker.sub_state = SubState::Reclosing;
                let at = now + SimTime::from_secs(reclose.1);
                self.reclose_at = Some(at);
                acts.timers.push((at, TimerKind::DeadTime));
            }
            Cause::Protection => self.db.breaker.sub_state = SubState::Normal,
            Cause::Manual | Cause::Instruction => {
                self.reclose_at = None;
                self.window_until = None;
                self.db.breaker.sub_state = SubState::ManualOperation;
            }
        }
        self.tell_home(acts);
    }

    fn close(&mut self, now: SimTime, kind: EventKind, detail: String, acts: &mut Actions) {
        self.db.breaker.position = Position::Closed;
        self.db.switch_count += 1;
        self.relay.reset();
        acts.grid.push(GridAction::SetBreaker { branch: self.db.branch_id.clone(), closed: true });
        self.log(acts, now, kind, format!("{detail} count={}", self.db.switch_count));
        self.tell_home(acts);
    }

    pub fn on_timer(&mut self, now: SimTime, kind: TimerKind) -> Actions {
        let mut acts = Actions::default();
        match kind {
            TimerKind::BreakerOperate => {
                if self.opening.is_some_and(|d| d <= now) {
                    self.opening = None;
                    self.open(now, Cause::Protection, &mut acts);
                }
            }
            TimerKind::TripDelay => {
                if self.closed() && self.opening.is_none() {
                    if let Some(stage) = self.relay.fire(now) {
                        self.trip(now, stage, false, &mut acts);
                    }
                }
            }
            TimerKind::DeadTime => {
                if self.reclose_at.is_some_and(|d| d <= now)
                    && !self.closed()
                    && self.db.breaker.sub_state == SubState::Reclosing
                {
                    self.reclose_at = None;
                    self.close(now, EventKind::Reclose, "cause=auto".to_string(), &mut acts);
                    let until = now + self.reclaim;
                    self.window_until = Some(until);
                    acts.timers.push((until, TimerKind::ReclaimWindow));
                }
            }
            TimerKind::ReclaimWindow => {
                if self.window_until.is_some_and(|d| d <= now) {
                    self.window_until = None;
                    if self.closed() && self.db.breaker.sub_state == SubState::Reclosing {
                        self.db.breaker.sub_state = SubState::Normal;
                    }
                }
            }
        }
        acts
    }

    /// Operator action from the scenario; takes effect at once.
    pub fn manual(&mut self, now: SimTime, open: bool) -> Result<Actions, AgentError> {
        self.operate(now, open, Cause::Manual)
    }

    fn operate(&mut self, now: SimTime, open: bool, cause: Cause) -> Result<Actions, AgentError> {
        if open != self.closed() {
            return Err(AgentError::AlreadyInState);
        }
        let mut acts = Actions::default();
        self.opening = None;
        self.relay.pending = None;
        self.last_due = None;
        if open {
            self.open(now, cause, &mut acts);
        } else {
            self.reclose_at = None;
            self.window_until = None;
            self.db.breaker.sub_state = SubState::Normal;
            self.close(now, EventKind::Close, format!("cause={}", cause.as_str()), &mut acts);
        }
        Ok(acts)
    }

    pub fn execute_instruction(&mut self, now: SimTime, payload: &Payload) -> Result<Actions, AgentError> {
        match payload {
            Payload::Instruction { target, action, issued_at } if *target == self.db.branch_id => {
                check_fresh(now, *issued_at)?;
                match action {
                    Action::OpenBreaker => self.operate(now, true, Cause::Instruction),
                    Action::CloseBreaker => self.operate(now, false, Cause::Instruction),
                    _ => Err(AgentError::NotAddressed(self.id().to_string())),
                }
            }
            Payload::LoadShedOrder { load_id, issued_at } if self.loads.contains(load_id) => {
                check_fresh(now, *issued_at)?;
                let mut acts = Actions::default();
                acts.grid.push(GridAction::ShedLoad { load: load_id.clone() });
                self.log(&mut acts, now, EventKind::Shed, format!("load={load_id}"));
                Ok(acts)
            }
            _ => Err(AgentError::NotAddressed(self.id().to_string())),
        }
    }

    /// Switches the active group. Repeats of the same (group, vector) pair,
    /// e.g. from two overlapping areas, are ignored.
    pub fn apply_group_update(&mut self, now: SimTime, group_id: u16, vector: u16) -> Result<Actions, AgentError> {
        let mut acts = Actions::default();
        if self.last_update == Some((group_id, vector)) {
            return Ok(acts);
        }
        if !self.db.groups.contains_key(&group_id) {
            return Err(AgentError::UnknownGroup { agent: self.id().to_string(), group: group_id });
        }
        self.last_update = Some((group_id, vector));
        if group_id != self.db.active_group {
            let mut detail = format!("from={} to={group_id} vector={vector}", self.db.active_group);
            if let Some(p) = self.relay.pending {
                detail.push_str(&format!(" pending_stage={}", p.stage));
            }
            self.db.active_group = group_id;
            self.log(&mut acts, now, EventKind::GroupChange, detail);
        }
        Ok(acts)
    }

    pub fn on_digest(&mut self, digest: StatusDigest) {
        self.db.neighbor_digests.insert(digest.element_id.clone(), digest);
    }
}
