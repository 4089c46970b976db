//! Central agent: system-wide frequency and voltage supervision.

use std::collections::{BTreeMap, BTreeSet};

use super::{Actions, AgentEvent, EventKind, Outgoing};
use crate::comms::{AgentLayout, AreaSummary, Mode, Payload, CENTRAL_ID, REGIONAL_GROUP};
use crate::grid::{Network, SourceKind};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralConfig {
    pub f0: f64,
    /// Load-frequency stiffness, pu per Hz.
    pub k_f: f64,
    pub f_min: f64,
    pub v_min: f64,
    pub q_step: f64,
}

impl Default for CentralConfig {
    fn default() -> Self {
        CentralConfig { f0: 50.0, k_f: 10.0, f_min: 49.5, v_min: 0.9, q_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadInfo {
    pub id: String,
    pub bus: String,
    pub p: f64,
    pub priority: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgInfo {
    pub id: String,
    pub kind: SourceKind,
    pub bus: String,
    pub area: String,
    pub online: bool,
    pub p: f64,
    pub q: f64,
    pub p_max: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralDb {
    pub frequency: f64,
    pub bus_v_estimates: BTreeMap<String, f64>,
    pub dispatch: BTreeMap<String, (f64, f64)>,
    pub shed_log: Vec<String>,
    pub events: Vec<AgentEvent>,
}

#[derive(Debug, Clone)]
pub struct CentralAgent {
    pub db: CentralDb,
    pub cfg: CentralConfig,
    pub grid_p: f64,
    pub loads: Vec<LoadInfo>,
    pub dgs: BTreeMap<String, DgInfo>,
    hops: BTreeMap<String, BTreeMap<String, usize>>,
    dg_order: Vec<String>,
}

/// Loads to drop, lowest priority first, until the modelled frequency
/// reaches `f_min`. Returns the shed ids and the frequency reached.
pub fn greedy_shed(loads: &[LoadInfo], shed: &BTreeSet<String>, p_load: f64, p_gen: f64, cfg: &CentralConfig) -> (Vec<String>, f64) {
    let mut order: Vec<&LoadInfo> = loads.iter().filter(|l| !shed.contains(&l.id)).collect();
    order.sort_by_key(|l| l.priority);
    let mut p = p_load;
    let mut out = Vec::new();
    let f = |p: f64| cfg.f0 - (p - p_gen) / cfg.k_f;
    for l in order {
        if f(p) >= cfg.f_min {
            break;
        }
        p -= l.p;
        out.push(l.id.clone());
    }
    (out, f(p))
}

impl CentralAgent {
    pub fn new(net: &Network, layout: &AgentLayout, cfg: CentralConfig) -> Self {
        let loads = net
            .loads
            .iter()
            .map(|l| LoadInfo { id: l.id.clone(), bus: l.bus.clone(), p: l.p, priority: l.shed_priority })
            .collect();
        let mut dgs = BTreeMap::new();
        for s in net.dgs() {
            let area = layout
                .home
                .get(&s.id)
                .and_then(|r| layout.areas_of_regional(r).into_iter().next())
                .unwrap_or_default();
            dgs.insert(
                s.id.clone(),
                DgInfo {
                    id: s.id.clone(),
                    kind: s.kind,
                    bus: s.bus.clone(),
                    area,
                    online: s.online,
                    p: s.p_out,
                    q: s.q_out,
                    p_max: s.p_max,
                    q_max: s.q_max,
                },
            );
        }
        let hops = net.buses.iter().map(|b| (b.id.clone(), net.hop_distances(&b.id))).collect();
        let mut c = CentralAgent {
            db: CentralDb {
                frequency: cfg.f0,
                bus_v_estimates: BTreeMap::new(),
                dispatch: BTreeMap::new(),
                shed_log: Vec::new(),
                events: Vec::new(),
            },
            cfg,
            grid_p: net.grid_supply().p_out,
            loads,
            dg_order: dgs.keys().cloned().collect(),
            dgs,
            hops,
        };
        c.db.frequency = c.frequency();
        c
    }

    pub fn p_load(&self) -> f64 {
        self.loads.iter().filter(|l| !self.db.shed_log.contains(&l.id)).map(|l| l.p).sum()
    }

    pub fn p_gen(&self) -> f64 {
        self.grid_p + self.dgs.values().filter(|d| d.online).map(|d| d.p).sum::<f64>()
    }

    pub fn frequency(&self) -> f64 {
        self.cfg.f0 - (self.p_load() - self.p_gen()) / self.cfg.k_f
    }

    fn alarm(&mut self, acts: &mut Actions, now: SimTime, detail: String) {
        let e = AgentEvent::new(now, CENTRAL_ID, EventKind::Alarm, detail);
        self.db.events.push(e.clone());
        acts.events.push(e);
    }

    fn order(&self, acts: &mut Actions, payload: Payload) {
        acts.sends.push(Outgoing { mode: Mode::Radio { area: REGIONAL_GROUP.to_string() }, payload, priority: 2 });
    }

    pub fn on_summary(&mut self, now: SimTime, s: &AreaSummary) -> Actions {
        for (i, id) in self.dg_order.iter().enumerate() {
            let d = self.dgs.get_mut(id).unwrap();
            if d.area == s.area {
                d.online = s.dg_bits & (1 << i) != 0;
            }
        }
        if !s.min_v_bus.is_empty() {
            self.db.bus_v_estimates.insert(s.min_v_bus.clone(), s.min_v);
        }
        let mut acts = self.supervise(now);
        if s.min_v < self.cfg.v_min && !s.min_v_bus.is_empty() {
            acts.extend(self.support_voltage(now, &s.min_v_bus));
        }
        acts
    }

    /// Frequency check: raise dispatchable DGs first, then shed.
    pub fn supervise(&mut self, now: SimTime) -> Actions {
        let mut acts = Actions::default();
        self.db.frequency = self.frequency();
        if self.db.frequency >= self.cfg.f_min {
            return acts;
        }
        let before = self.db.frequency;
        for id in self.dg_order.clone() {
            let d = self.dgs.get_mut(&id).unwrap();
            if d.online && d.kind.is_dispatchable() && d.p < d.p_max {
                d.p = d.p_max;
                let (p, q) = (d.p, d.q);
                self.db.dispatch.insert(id.clone(), (p, q));
                self.order(&mut acts, Payload::DgDispatch { target: id, p, q, issued_at: now.as_secs() });
            }
        }
        let shed: BTreeSet<String> = self.db.shed_log.iter().cloned().collect();
        let (drop, f) = greedy_shed(&self.loads, &shed, self.p_load(), self.p_gen(), &self.cfg);
        for id in drop {
            self.db.shed_log.push(id.clone());
            self.order(&mut acts, Payload::LoadShedOrder { load_id: id, issued_at: now.as_secs() });
        }
        self.db.frequency = f;
        if f < self.cfg.f_min {
            self.alarm(&mut acts, now, format!("reason=frequency f_before={:.3} f_after={f:.3}", before));
        }
        acts
    }

    /// Raises reactive output of the online DG closest to a low-voltage bus.
    fn support_voltage(&mut self, now: SimTime, bus: &str) -> Actions {
        let mut acts = Actions::default();
        let Some(dist) = self.hops.get(bus) else { return acts };
        let best = self
            .dgs
            .values()
            .filter(|d| d.online && d.q < d.q_max - 1e-12)
            .min_by_key(|d| (dist.get(&d.bus).copied().unwrap_or(usize::MAX), d.id.clone()))
            .map(|d| d.id.clone());
        if let Some(id) = best {
            let d = self.dgs.get_mut(&id).unwrap();
            d.q = (d.q + self.cfg.q_step).min(d.q_max);
            let (p, q) = (d.p, d.q);
            self.db.dispatch.insert(id.clone(), (p, q));
            self.order(&mut acts, Payload::DgDispatch { target: id.clone(), p, q, issued_at: now.as_secs() });
        }
        acts
    }
}
