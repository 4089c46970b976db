//! Regional agent: area gateway, DG status tracking and setting distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Actions, AgentError, AgentEvent, EventKind, Outgoing};
use crate::adaptive::{DgStatusVector, KnowledgeBase};
use crate::comms::{AgentKind, AgentLayout, AreaSummary, BlackboardEntry, Mode, Payload, CENTRAL_ID};
use crate::grid::Network;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionalDb {
    pub area_id: String,
    pub members: BTreeSet<String>,
    pub dg_status: BTreeMap<String, bool>,
    pub last_distributed: BTreeMap<String, u16>,
    pub summaries: Vec<AreaSummary>,
    pub events: Vec<AgentEvent>,
    /// Knowledge-base lookups performed so far.
    pub lookups: u64,
}

#[derive(Debug, Clone)]
pub struct RegionalAgent {
    pub id: String,
    pub db: RegionalDb,
    kb: Option<Arc<KnowledgeBase>>,
    /// Terminal -> area (of this agent) it is reached through.
    member_area: BTreeMap<String, String>,
    /// Terminals reporting to this agent.
    home_terminals: BTreeSet<String>,
    /// DGs reporting to this agent, with their last reported output.
    dg_p: BTreeMap<String, f64>,
    dg_index: BTreeMap<String, usize>,
    /// Load -> branch that can shed it, for loads relayed by this agent.
    load_branch: BTreeMap<String, String>,
    area_loads: BTreeMap<String, f64>,
    shed: BTreeSet<String>,
    branch_bus: BTreeMap<String, String>,
    bus_v: BTreeMap<String, f64>,
    trips: u8,
}

impl RegionalAgent {
    pub fn new(
        id: &str,
        layout: &AgentLayout,
        net: &Network,
        kb: Option<Arc<KnowledgeBase>>,
        initial_groups: &BTreeMap<String, u16>,
    ) -> Self {
        let areas = layout.areas_of_regional(id);
        let mut member_area = BTreeMap::new();
        for a in &areas {
            for m in layout.area_members(a) {
                member_area.entry(m).or_insert_with(|| a.clone());
            }
        }
        let members: BTreeSet<String> = member_area.keys().cloned().collect();
        let home_terminals: BTreeSet<String> =
            layout.home.iter().filter(|(_, r)| *r == id).map(|(t, _)| t.clone()).collect();
        let dgs = net.dgs();
        let dg_index = dgs.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let dg_p = dgs.iter().filter(|s| home_terminals.contains(&s.id)).map(|s| (s.id.clone(), s.p_out)).collect();
        let mut load_branch = BTreeMap::new();
        let mut area_loads = BTreeMap::new();
        for l in &net.loads {
            if let Some(br) = net.branches.iter().find(|b| b.to_bus == l.bus) {
                if home_terminals.contains(&br.id) {
                    load_branch.insert(l.id.clone(), br.id.clone());
                    area_loads.insert(l.id.clone(), l.p);
                }
            }
        }
        let last_distributed =
            initial_groups.iter().filter(|(b, _)| members.contains(*b)).map(|(b, g)| (b.clone(), *g)).collect();
        RegionalAgent {
            id: id.to_string(),
            db: RegionalDb {
                area_id: areas.first().cloned().unwrap_or_default(),
                members,
                dg_status: dgs.iter().map(|s| (s.id.clone(), s.online)).collect(),
                last_distributed,
                summaries: Vec::new(),
                events: Vec::new(),
                lookups: 0,
            },
            kb,
            member_area,
            home_terminals,
            dg_p,
            dg_index,
            load_branch,
            area_loads,
            shed: BTreeSet::new(),
            branch_bus: net.branches.iter().map(|b| (b.id.clone(), b.from_bus.clone())).collect(),
            bus_v: BTreeMap::new(),
            trips: 0,
        }
    }

    fn alarm(&mut self, acts: &mut Actions, now: SimTime, detail: String) {
        let e = AgentEvent::new(now, &self.id, EventKind::Alarm, detail);
        self.db.events.push(e.clone());
        acts.events.push(e);
    }

    /// Digest or trip notice from a terminal of this agent's areas.
    pub fn ingest(&mut self, now: SimTime, sender: &str, kind: AgentKind, payload: &Payload) -> Result<Actions, AgentError> {
        if !self.db.members.contains(sender) {
            return Err(AgentError::NotMember(sender.to_string()));
        }
        let mut acts = Actions::default();
        match payload {
            Payload::StatusDigest(d) if kind == AgentKind::TerminalDg => {
                self.dg_p.insert(d.element_id.clone(), d.i_mag_a);
                let online = d.breaker_status & 1 == 1;
                if self.db.dg_status.get(&d.element_id) != Some(&online) {
                    self.db.dg_status.insert(d.element_id.clone(), online);
                    acts.sends.push(Outgoing {
                        mode: Mode::BlackboardPost { key: format!("dg/{}", d.element_id) },
                        payload: payload.clone(),
                        priority: 1,
                    });
                    acts.extend(self.adapt(now));
                    acts.extend(self.summary());
                }
            }
            Payload::StatusDigest(d) => {
                if let (Some(v), Some(bus)) = (d.v_mag, self.branch_bus.get(&d.element_id)) {
                    self.bus_v.insert(bus.clone(), v);
                }
            }
            Payload::TripNotice { .. } => {
                self.trips = self.trips.saturating_add(1);
                acts.extend(self.summary());
            }
            _ => {}
        }
        Ok(acts)
    }

    /// A blackboard post by another regional agent has landed.
    pub fn on_blackboard(&mut self, now: SimTime, key: &str, entry: &BlackboardEntry) -> Actions {
        if entry.writer == self.id {
            return Actions::default();
        }
        match (key.strip_prefix("dg/"), &entry.value) {
            (Some(dg), Payload::StatusDigest(d)) => {
                let online = d.breaker_status & 1 == 1;
                if self.db.dg_status.get(dg) != Some(&online) {
                    self.db.dg_status.insert(dg.to_string(), online);
                    return self.adapt(now);
                }
                Actions::default()
            }
            _ => Actions::default(),
        }
    }

    pub fn vector(&self) -> DgStatusVector {
        DgStatusVector { status: self.db.dg_status.iter().map(|(k, v)| (k.clone(), *v)).collect() }
    }

    /// Looks up the settings for the current DG status and radios a group
    /// update to every member branch whose group changed.
    pub fn adapt(&mut self, now: SimTime) -> Actions {
        let mut acts = Actions::default();
        let Some(kb) = self.kb.clone() else {
            return acts;
        };
        let vector = self.vector();
        self.db.lookups += 1;
        let settings = match kb.lookup(&vector) {
            Ok(s) => s,
            Err(e) => {
                self.alarm(&mut acts, now, format!("reason=lookup vector={} error={}", vector.bits(), e.to_string().replace(' ', "_")));
                return acts;
            }
        };
        let idx = vector.index();
        for (branch, area) in &self.member_area {
            let Some(g) = settings.get(branch) else { continue };
            if self.db.last_distributed.get(branch) != Some(&g.group_id) {
                self.db.last_distributed.insert(branch.clone(), g.group_id);
                acts.sends.push(Outgoing {
                    mode: Mode::Radio { area: area.clone() },
                    payload: Payload::SettingGroupUpdate { target: branch.clone(), group_id: g.group_id, vector: idx },
                    priority: 3,
                });
            }
        }
        acts
    }

    pub fn summary(&mut self) -> Actions {
        let mut dg_bits = 0u16;
        let mut p_gen = 0.0;
        for (id, p) in &self.dg_p {
            if self.db.dg_status.get(id) == Some(&true) {
                dg_bits |= 1 << self.dg_index[id];
                p_gen += p;
            }
        }
        let p_load = self.area_loads.iter().filter(|(l, _)| !self.shed.contains(*l)).map(|(_, p)| p).sum();
        let (min_v_bus, min_v) = self
            .bus_v
            .iter()
            .fold((String::new(), 1.0), |(b, v), (bus, x)| if *x < v { (bus.clone(), *x) } else { (b, v) });
        let s = AreaSummary {
            area: self.db.area_id.clone(),
            dg_bits,
            p_load,
            p_gen,
            min_v,
            min_v_bus,
            trips: self.trips,
        };
        self.db.summaries.push(s.clone());
        let mut acts = Actions::default();
        acts.sends.push(Outgoing {
            mode: Mode::BlackboardPost { key: format!("area/{}", self.db.area_id) },
            payload: Payload::AreaSummary(s.clone()),
            priority: 1,
        });
        acts.sends.push(Outgoing {
            mode: Mode::Direct { dest: CENTRAL_ID.to_string() },
            payload: Payload::AreaSummary(s),
            priority: 1,
        });
        acts
    }

    /// Passes a central order on to the addressed terminal if it reports here.
    pub fn relay(&mut self, sender: &str, payload: &Payload) -> Actions {
        let mut acts = Actions::default();
        if sender != CENTRAL_ID {
            return acts;
        }
        let target = match payload {
            Payload::Instruction { target, .. } | Payload::DgDispatch { target, .. } => Some(target.clone()),
            Payload::LoadShedOrder { load_id, .. } => self.load_branch.get(load_id).cloned(),
            _ => None,
        };
        let Some(target) = target else { return acts };
        if !self.home_terminals.contains(&target) {
            return acts;
        }
        if let Payload::LoadShedOrder { load_id, .. } = payload {
            self.shed.insert(load_id.clone());
        }
        if let Some(area) = self.member_area.get(&target) {
            acts.sends.push(Outgoing { mode: Mode::Radio { area: area.clone() }, payload: payload.clone(), priority: 2 });
        }
        acts
    }
}
