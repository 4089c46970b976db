//! Distributed-generator terminal agent.

use super::{check_fresh, pu, Actions, AgentError, AgentEvent, EventKind, GridAction, Outgoing};
use crate::comms::{Action, Mode, Payload, StatusDigest};
use crate::grid::{Direction, Source};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct DgConfig {
    pub uv_threshold: f64,
    pub uv_time: SimTime,
}

impl Default for DgConfig {
    fn default() -> Self {
        DgConfig { uv_threshold: 0.5, uv_time: SimTime::from_millis(160.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgAgentDb {
    pub source_id: String,
    pub online: bool,
    pub p_out: f64,
    pub q_out: f64,
    pub v_terminal: f64,
    /// Seconds spent continuously below the undervoltage threshold.
    pub undervoltage_timer: f64,
    pub events: Vec<AgentEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgAgent {
    pub db: DgAgentDb,
    pub p_max: f64,
    pub q_max: f64,
    pub home: String,
    pub cfg: DgConfig,
    uv_since: Option<SimTime>,
}

impl DgAgent {
    pub fn new(src: &Source, home: &str, cfg: DgConfig) -> Self {
        DgAgent {
            db: DgAgentDb {
                source_id: src.id.clone(),
                online: src.online,
                p_out: src.p_out,
                q_out: src.q_out,
                v_terminal: 1.0,
                undervoltage_timer: 0.0,
                events: Vec::new(),
            },
            p_max: src.p_max,
            q_max: src.q_max,
            home: home.to_string(),
            cfg,
            uv_since: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.db.source_id
    }

    fn log(&mut self, acts: &mut Actions, t: SimTime, kind: EventKind, detail: String) {
        let e = AgentEvent::new(t, &self.db.source_id, kind, detail);
        self.db.events.push(e.clone());
        acts.events.push(e);
    }

    fn report(&self, acts: &mut Actions) {
        acts.sends.push(Outgoing {
            mode: Mode::Direct { dest: self.home.clone() },
            payload: Payload::StatusDigest(StatusDigest {
                element_id: self.db.source_id.clone(),
                breaker_status: u8::from(self.db.online),
                direction: Direction::Undetermined,
                i_mag_a: self.db.p_out,
                v_mag: None,
                switch_count: None,
            }),
            priority: 2,
        });
    }

    /// Undervoltage ride-through check, once per measurement cycle.
    pub fn dg_protect(&mut self, now: SimTime, v_terminal: f64) -> Actions {
        let mut acts = Actions::default();
        self.db.v_terminal = v_terminal;
        if !self.db.online {
            self.uv_since = None;
            self.db.undervoltage_timer = 0.0;
            return acts;
        }
        if v_terminal >= self.cfg.uv_threshold {
            self.uv_since = None;
            self.db.undervoltage_timer = 0.0;
            return acts;
        }
        let since = *self.uv_since.get_or_insert(now);
        self.db.undervoltage_timer = (now - since).as_secs();
        if now - since >= self.cfg.uv_time {
            self.uv_since = None;
            self.db.undervoltage_timer = 0.0;
            self.set_online(now, false, "undervoltage", &mut acts);
        }
        acts
    }

    fn set_online(&mut self, now: SimTime, online: bool, cause: &str, acts: &mut Actions) {
        self.db.online = online;
        acts.grid.push(GridAction::SetDg { id: self.db.source_id.clone(), online });
        let kind = if online { EventKind::DgOn } else { EventKind::DgOff };
        let detail = if online { format!("cause={cause}") } else { format!("cause={cause} v={}", pu(self.db.v_terminal)) };
        self.log(acts, now, kind, detail);
        self.report(acts);
    }

    /// Status change imposed from outside (scenario events).
    pub fn external_status(&mut self, now: SimTime, online: bool) -> Actions {
        let mut acts = Actions::default();
        if online != self.db.online {
            self.uv_since = None;
            self.set_online(now, online, "external", &mut acts);
        }
        acts
    }

    pub fn execute_instruction(&mut self, now: SimTime, payload: &Payload) -> Result<Actions, AgentError> {
        let mut acts = Actions::default();
        match payload {
            Payload::Instruction { target, action, issued_at } if *target == self.db.source_id => {
                check_fresh(now, *issued_at)?;
                let online = match action {
                    Action::DisconnectDg => false,
                    Action::ConnectDg => true,
                    _ => return Err(AgentError::NotAddressed(self.id().to_string())),
                };
                if online == self.db.online {
                    return Err(AgentError::AlreadyInState);
                }
                self.set_online(now, online, "instruction", &mut acts);
            }
            Payload::DgDispatch { target, p, q, issued_at } if *target == self.db.source_id => {
                check_fresh(now, *issued_at)?;
                let p = p.clamp(0.0, self.p_max);
                let q = q.clamp(-self.q_max, self.q_max);
                self.db.p_out = p;
                self.db.q_out = q;
                acts.grid.push(GridAction::Dispatch { id: self.db.source_id.clone(), p, q });
                self.log(&mut acts, now, EventKind::DgDispatch, format!("p={} q={}", pu(p), pu(q)));
            }
            _ => return Err(AgentError::NotAddressed(self.id().to_string())),
        }
        Ok(acts)
    }
}
