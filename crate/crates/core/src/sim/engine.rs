//! The event loop.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::logs::{LogFile, Metrics, SIM_AGENT};
use super::scenario::{load_scenario, DgChange, SimEvent, SimEventKind};
use super::{SimConfig, SimError};
use crate::adaptive::{compute_settings, CoordConfig, DgStatusVector, KnowledgeBase};
use crate::agents::{
    Actions, AgentError, AgentEvent, BranchAgent, BreakerStatus, CentralAgent, DgAgent, DgConfig, EventKind, GridAction,
    RegionalAgent, SettingGroup,
};
use crate::comms::{AgentKind, AgentLayout, Delivery, Fabric, MessageRecord, Payload, Recipient};
use crate::grid::{
    branch_measurement, solve_fault, solve_prefault, End, FaultSolution, FaultSpec, Network, I_NOISE_FLOOR,
};
use crate::time::SimTime;

/// Where the relay settings come from.
#[derive(Debug, Clone)]
pub enum SettingsMode {
    /// Groups from the knowledge base, switched as DG status changes.
    Adaptive(Arc<KnowledgeBase>),
    /// One fixed group per branch, taken from the knowledge base entry for
    /// `bits` when given, otherwise computed for that vector. `bits` of
    /// `None` means the initial DG status.
    Frozen { kb: Option<Arc<KnowledgeBase>>, bits: Option<String> },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: LogFile,
    pub metrics: Metrics,
    /// Frequency estimate of the central agent at the end of the run.
    pub frequency: f64,
    pub shed: Vec<String>,
    pub lookups: u64,
    pub network: Network,
    pub breakers: BTreeMap<String, BreakerStatus>,
}

pub struct Simulation {
    net: Network,
    cfg: SimConfig,
    fabric: Fabric,
    layout: AgentLayout,
    branches: BTreeMap<String, BranchAgent>,
    dgs: BTreeMap<String, DgAgent>,
    regionals: BTreeMap<String, RegionalAgent>,
    central: CentralAgent,
    queue: BTreeMap<(SimTime, u64), SimEventKind>,
    seq: u64,
    scheduled: BTreeSet<SimTime>,
    fault: Option<FaultSpec>,
    fault_live: bool,
    sol: FaultSolution,
    dirty: bool,
    events: Vec<AgentEvent>,
    messages: Vec<MessageRecord>,
}

fn coord_config(cfg: &SimConfig) -> CoordConfig {
    CoordConfig {
        alpha: cfg.alpha,
        cycle_s: cfg.cycle.as_secs(),
        breaker_s: cfg.breaker.as_secs(),
        ..CoordConfig::default()
    }
}

fn initial_settings(net: &Network, mode: &SettingsMode, cfg: &SimConfig) -> Result<BTreeMap<String, SettingGroup>, SimError> {
    match mode {
        SettingsMode::Adaptive(kb) => {
            kb.check_network(net)?;
            Ok(kb.lookup(&DgStatusVector::of(net))?.clone())
        }
        SettingsMode::Frozen { kb, bits } => {
            let vector = match bits {
                Some(b) => DgStatusVector::from_bits(net, b)
                    .ok_or_else(|| SimError::Settings(format!("{b:?} is not a DG status vector of this network")))?,
                None => DgStatusVector::of(net),
            };
            if let Some(kb) = kb {
                kb.check_network(net)?;
                return Ok(kb.lookup(&vector)?.clone());
            }
            compute_settings(net, &vector, &coord_config(cfg))
                .map_err(|e| SimError::Settings(format!("vector {}: {}", vector.bits(), e.reason)))
        }
    }
}

impl Simulation {
    pub fn new(net: &Network, mode: &SettingsMode, cfg: &SimConfig) -> Result<Simulation, SimError> {
        let net = net.clone();
        let layout = AgentLayout::for_network(&net);
        let settings = initial_settings(&net, mode, cfg)?;
        let kb = match mode {
            SettingsMode::Adaptive(kb) => Some(kb.clone()),
            SettingsMode::Frozen { .. } => None,
        };

        let mut branches = BTreeMap::new();
        for br in &net.branches {
            let g = settings.get(&br.id).ok_or_else(|| SimError::Settings(format!("no settings for {}", br.id)))?;
            let groups = match &kb {
                Some(kb) => kb.groups_for(&br.id),
                None => BTreeMap::from([(g.group_id, g.clone())]),
            };
            let home = layout.home.get(&br.id).cloned().unwrap_or_default();
            let mut agent = BranchAgent::new(&br.id, groups, g.group_id, &home);
            agent.relay.alpha = cfg.alpha;
            agent.breaker_time = cfg.breaker;
            agent.reclaim = cfg.reclaim;
            agent.peers = net
                .branches
                .iter()
                .filter(|o| net.branches_adjacent(&br.id, &o.id) && layout.links.linked(&br.id, &o.id))
                .map(|o| o.id.clone())
                .collect();
            agent.loads = net
                .loads
                .iter()
                .filter(|l| net.branches.iter().find(|b| b.to_bus == l.bus).is_some_and(|b| b.id == br.id))
                .map(|l| l.id.clone())
                .collect();
            branches.insert(br.id.clone(), agent);
        }

        let dg_cfg = DgConfig { uv_threshold: cfg.uv_threshold, uv_time: cfg.uv_time };
        let dgs = net
            .dgs()
            .into_iter()
            .map(|s| {
                let home = layout.home.get(&s.id).cloned().unwrap_or_default();
                (s.id.clone(), DgAgent::new(s, &home, dg_cfg.clone()))
            })
            .collect();

        let initial_groups: BTreeMap<String, u16> = settings.iter().map(|(b, g)| (b.clone(), g.group_id)).collect();
        let regionals = layout
            .regionals()
            .into_iter()
            .map(|r| {
                let agent = RegionalAgent::new(&r, &layout, &net, kb.clone(), &initial_groups);
                (r, agent)
            })
            .collect();
        let central = CentralAgent::new(&net, &layout, cfg.central.clone());

        Ok(Simulation {
            fabric: Fabric::new(layout.clone(), cfg.latency.clone()),
            sol: solve_prefault(&net),
            net,
            cfg: cfg.clone(),
            layout,
            branches,
            dgs,
            regionals,
            central,
            queue: BTreeMap::new(),
            seq: 0,
            scheduled: BTreeSet::new(),
            fault: None,
            fault_live: false,
            dirty: false,
            events: Vec::new(),
            messages: Vec::new(),
        })
    }

    fn push(&mut self, t: SimTime, kind: SimEventKind) {
        self.queue.insert((t, self.seq), kind);
        self.seq += 1;
    }

    /// Runs the given events (scripted events plus measurement cycles) to
    /// the horizon.
    pub fn run(mut self, events: Vec<SimEvent>) -> RunResult {
        for e in events {
            self.push(e.t, e.kind);
        }
        while let Some(((t, _), kind)) = self.queue.pop_first() {
            if t >= self.cfg.horizon {
                break;
            }
            self.handle(t, kind);
            if self.dirty {
                self.dirty = false;
                self.resolve(t);
            }
        }
        let agents = self.layout.agents.values().map(|a| (a.id.clone(), a.kind)).collect();
        let log = LogFile { agents, events: self.events, messages: self.messages };
        RunResult {
            metrics: log.metrics(),
            log,
            frequency: self.central.frequency(),
            shed: self.central.db.shed_log.clone(),
            lookups: self.regionals.values().map(|r| r.db.lookups).sum(),
            network: self.net,
            breakers: self.branches.iter().map(|(id, a)| (id.clone(), a.db.breaker)).collect(),
        }
    }

    fn sim_event(&mut self, t: SimTime, kind: EventKind, detail: String) {
        self.events.push(AgentEvent::new(t, SIM_AGENT, kind, detail));
    }

    fn alarm(&mut self, t: SimTime, agent: &str, reason: &str, err: &dyn std::fmt::Display) {
        let detail = format!("reason={reason} error={}", err.to_string().replace(' ', "_"));
        self.events.push(AgentEvent::new(t, agent, EventKind::Alarm, detail));
    }

    fn handle(&mut self, t: SimTime, kind: SimEventKind) {
        match kind {
            SimEventKind::FaultApply(spec) => {
                let detail = format!(
                    "cause=scenario branch={} pos={} zf={}{}j{} permanent={}",
                    spec.branch_id,
                    spec.position,
                    spec.z_fault.re,
                    if spec.z_fault.im < 0.0 { '-' } else { '+' },
                    spec.z_fault.im.abs(),
                    u8::from(spec.permanent)
                );
                self.sim_event(t, EventKind::Fault, detail);
                self.fault = Some(spec);
                self.fault_live = true;
                self.dirty = true;
            }
            SimEventKind::FaultClear(branch) => {
                if self.fault.as_ref().is_some_and(|f| f.branch_id == branch) {
                    self.fault = None;
                    if self.fault_live {
                        self.fault_live = false;
                        self.sim_event(t, EventKind::Cleared, format!("cause=scenario branch={branch}"));
                    }
                    self.dirty = true;
                }
            }
            SimEventKind::Dg { id, change } => {
                let Some(agent) = self.dgs.get_mut(&id) else { return };
                match change {
                    DgChange::On | DgChange::Off => {
                        let acts = agent.external_status(t, change == DgChange::On);
                        self.apply(t, &id, acts);
                    }
                    DgChange::P(p) => self.set_output(t, &id, Some(p), None),
                    DgChange::Q(q) => self.set_output(t, &id, None, Some(q)),
                }
            }
            SimEventKind::Load { id, connected } => {
                if let Some(l) = self.net.load_mut(&id) {
                    l.connected = connected;
                    self.dirty = true;
                }
            }
            SimEventKind::Breaker { branch, open } => {
                let Some(agent) = self.branches.get_mut(&branch) else { return };
                match agent.manual(t, open) {
                    Ok(acts) => self.apply(t, &branch, acts),
                    Err(e) => self.alarm(t, &branch, "manual", &e),
                }
            }
            SimEventKind::MeasureCycle => self.cycle(t),
            SimEventKind::MessageDelivery => {
                self.scheduled.remove(&t);
                for d in self.fabric.deliver(t) {
                    self.messages.push(d.record());
                    self.route(t, d);
                }
            }
            SimEventKind::TimerExpiry { agent, timer } => {
                if let Some(a) = self.branches.get_mut(&agent) {
                    let acts = a.on_timer(t, timer);
                    self.apply(t, &agent, acts);
                }
            }
        }
    }

    fn set_output(&mut self, t: SimTime, id: &str, p: Option<f64>, q: Option<f64>) {
        let Some(agent) = self.dgs.get_mut(id) else { return };
        if let Some(p) = p {
            agent.db.p_out = p.clamp(0.0, agent.p_max);
        }
        if let Some(q) = q {
            agent.db.q_out = q.clamp(-agent.q_max, agent.q_max);
        }
        let (p, q) = (agent.db.p_out, agent.db.q_out);
        if let Some(s) = self.net.source_mut(id) {
            s.p_out = p;
            s.q_out = q;
        }
        self.events.push(AgentEvent::new(t, id, EventKind::DgDispatch, format!("p={p:.4} q={q:.4} cause=scenario")));
        self.dirty = true;
    }

    fn cycle(&mut self, t: SimTime) {
        let ids: Vec<String> = self.branches.keys().cloned().collect();
        for id in ids {
            let m = match branch_measurement(&self.net, &self.sol, &id, End::From, t.as_secs()) {
                Ok(m) => m,
                Err(e) => {
                    self.alarm(t, &id, "measurement", &e);
                    continue;
                }
            };
            match self.branches.get_mut(&id).expect("known branch").measure_cycle(t, m) {
                Ok(acts) => self.apply(t, &id, acts),
                Err(e) => self.alarm(t, &id, "cycle", &e),
            }
        }
        let ids: Vec<String> = self.dgs.keys().cloned().collect();
        for id in ids {
            let bus = &self.net.source(&id).expect("known source").bus;
            let v = self.sol.voltage(bus).unwrap_or_default().norm();
            let acts = self.dgs.get_mut(&id).expect("known dg").dg_protect(t, v);
            self.apply(t, &id, acts);
        }
    }

    fn route(&mut self, t: SimTime, d: Delivery) {
        let sender = d.msg.sender.clone();
        let payload = &d.msg.payload;
        let id = match d.to {
            Recipient::Blackboard(key) => {
                let Some(entry) = self.fabric.blackboard().read(&key).cloned() else { return };
                let ids: Vec<String> = self.regionals.keys().filter(|r| **r != sender).cloned().collect();
                for r in ids {
                    let acts = self.regionals.get_mut(&r).expect("known regional").on_blackboard(t, &key, &entry);
                    self.apply(t, &r, acts);
                }
                return;
            }
            Recipient::Agent(id) => id,
        };
        let Some(kind) = self.layout.kind(&id) else { return };
        let result: Result<Actions, AgentError> = match kind {
            AgentKind::TerminalBranch => {
                let agent = self.branches.get_mut(&id).expect("known branch");
                match payload {
                    Payload::StatusDigest(dg) => {
                        agent.on_digest(dg.clone());
                        Ok(Actions::default())
                    }
                    Payload::SettingGroupUpdate { target, group_id, vector } if *target == id => {
                        agent.apply_group_update(t, *group_id, *vector)
                    }
                    Payload::Instruction { .. } | Payload::LoadShedOrder { .. } => agent.execute_instruction(t, payload),
                    _ => Ok(Actions::default()),
                }
            }
            AgentKind::TerminalDg => {
                let agent = self.dgs.get_mut(&id).expect("known dg");
                match payload {
                    Payload::Instruction { .. } | Payload::DgDispatch { .. } => agent.execute_instruction(t, payload),
                    _ => Ok(Actions::default()),
                }
            }
            AgentKind::Regional => {
                let sender_kind = self.layout.kind(&sender);
                let agent = self.regionals.get_mut(&id).expect("known regional");
                match sender_kind {
                    Some(AgentKind::Central) => Ok(agent.relay(&sender, payload)),
                    Some(k) if k.is_terminal() => agent.ingest(t, &sender, k, payload),
                    _ => Ok(Actions::default()),
                }
            }
            AgentKind::Central => match payload {
                Payload::AreaSummary(s) => Ok(self.central.on_summary(t, s)),
                _ => Ok(Actions::default()),
            },
        };
        match result {
            Ok(acts) => self.apply(t, &id, acts),
            Err(AgentError::NotAddressed(_)) => {}
            Err(e) => self.alarm(t, &id, "message", &e),
        }
    }

    fn apply(&mut self, t: SimTime, agent: &str, acts: Actions) {
        self.events.extend(acts.events);
        for out in acts.sends {
            if let Err(e) = self.fabric.send(t, agent, out.mode, out.payload, out.priority) {
                self.alarm(t, agent, "comms", &e);
            }
        }
        for a in self.fabric.arrivals() {
            if self.scheduled.insert(a) {
                self.push(a, SimEventKind::MessageDelivery);
            }
        }
        for (at, timer) in acts.timers {
            self.push(at.max(t), SimEventKind::TimerExpiry { agent: agent.to_string(), timer });
        }
        for g in acts.grid {
            self.dirty = true;
            match g {
                GridAction::SetBreaker { branch, closed } => {
                    if let Some(b) = self.net.branch_mut(&branch) {
                        b.breaker_closed = closed;
                    }
                    let extinguish =
                        !closed && self.fault.as_ref().is_some_and(|f| f.branch_id == branch && !f.permanent);
                    if extinguish {
                        self.fault = None;
                        if self.fault_live {
                            self.fault_live = false;
                            self.sim_event(t, EventKind::Cleared, format!("cause=extinguished branch={branch}"));
                        }
                    }
                }
                GridAction::SetDg { id, online } => {
                    if let Some(s) = self.net.source_mut(&id) {
                        s.online = online;
                    }
                }
                GridAction::Dispatch { id, p, q } => {
                    if let Some(s) = self.net.source_mut(&id) {
                        s.p_out = p;
                        s.q_out = q;
                    }
                }
                GridAction::ShedLoad { load } => {
                    if let Some(l) = self.net.load_mut(&load) {
                        l.connected = false;
                    }
                }
            }
        }
    }

    /// Re-solves the network and logs fault isolation or re-energisation.
    fn resolve(&mut self, t: SimTime) {
        let Some(fault) = self.fault.clone() else {
            self.sol = solve_prefault(&self.net);
            return;
        };
        let (sol, live) = match solve_fault(&self.net, &fault) {
            Ok(s) => {
                let live = s.fault_i.norm() > I_NOISE_FLOOR;
                (s, live)
            }
            Err(_) => (solve_prefault(&self.net), false),
        };
        self.sol = sol;
        if self.fault_live && !live {
            self.sim_event(t, EventKind::Cleared, format!("cause=isolated branch={}", fault.branch_id));
        } else if !self.fault_live && live {
            self.sim_event(t, EventKind::Fault, format!("cause=reenergized branch={}", fault.branch_id));
        }
        self.fault_live = live;
    }
}

/// Parses the scenario, builds the agents and runs to the horizon.
pub fn run(net: &Network, mode: &SettingsMode, scenario: &str, cfg: &SimConfig) -> Result<RunResult, SimError> {
    let events = load_scenario(scenario, net, cfg)?;
    Ok(Simulation::new(net, mode, cfg)?.run(events))
}
