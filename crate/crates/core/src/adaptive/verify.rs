//! Cycle-level replay of the relay logic against bolted faults.

use std::collections::BTreeMap;
use std::fmt;

use super::{CoordConfig, DgStatusVector};
use crate::agents::relay::{decide, RelayCore, SettingGroup};
use crate::grid::{direction_of, solve_fault, End, FaultSolution, FaultSpec, Network};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub branch: String,
    /// `None` for a branch with no settings at all.
    pub position: Option<f64>,
    /// Breaker that tripped out of turn; `None` when nothing cleared the fault.
    pub tripped: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.position, &self.tripped) {
            (None, _) => write!(f, "{} uncovered", self.branch),
            (Some(p), Some(t)) => write!(f, "{}@{} tripped {}", self.branch, p, t),
            (Some(p), None) => write!(f, "{}@{} not cleared", self.branch, p),
        }
    }
}

/// Checks every closed branch at every configured fault position.
pub fn verify_selectivity(
    net: &Network,
    vector: &DgStatusVector,
    settings: &BTreeMap<String, SettingGroup>,
    cfg: &CoordConfig,
) -> Vec<Violation> {
    let net = vector.apply(net);
    let mut out = Vec::new();
    for br in net.branches.iter().filter(|b| b.breaker_closed) {
        if !settings.contains_key(&br.id) {
            out.push(Violation { branch: br.id.clone(), position: None, tripped: None });
        }
    }
    for br in net.branches.iter().filter(|b| b.breaker_closed) {
        for &pos in &cfg.positions {
            if let Some(v) = replay(&net, settings, &br.id, pos, cfg) {
                out.push(v);
            }
        }
    }
    out
}

fn relay_input(sol: &FaultSolution, id: &str) -> (f64, crate::grid::Direction) {
    let i = sol.current(id, End::From).unwrap_or_default();
    (i.norm(), direction_of(i))
}

fn replay(
    net: &Network,
    settings: &BTreeMap<String, SettingGroup>,
    own: &str,
    pos: f64,
    cfg: &CoordConfig,
) -> Option<Violation> {
    let violation = |tripped: Option<String>| {
        Some(Violation { branch: own.to_string(), position: Some(pos), tripped })
    };
    let mut state = net.clone();
    let fault = FaultSpec::bolted(own, pos);
    let Ok(mut sol) = solve_fault(&state, &fault) else {
        return violation(None);
    };
    let mut relays: BTreeMap<&str, RelayCore> = settings
        .keys()
        .filter(|id| state.branch(id).is_some_and(|b| b.breaker_closed))
        .map(|id| (id.as_str(), RelayCore { alpha: cfg.alpha, ..RelayCore::default() }))
        .collect();
    let cycle = SimTime::from_secs(cfg.cycle_s);
    let horizon = SimTime::from_secs(cfg.verify_horizon_s);
    let mut next_cycle = SimTime::ZERO;
    let mut open_at: Option<SimTime> = None;
    let mut opened = false;

    loop {
        let timer = relays.values().filter_map(|r| r.pending.map(|p| p.due())).min();
        let now = [Some(next_cycle), timer, open_at].into_iter().flatten().min().unwrap();
        if now > horizon {
            return if opened { None } else { violation(None) };
        }
        let mut trips: Vec<String> = Vec::new();
        if now == next_cycle {
            for (id, relay) in relays.iter_mut() {
                let (i, dir) = relay_input(&sol, id);
                relay.filter([i; 3]);
                if relay.arm(now, decide(&settings[*id], relay.current(), dir)).is_some() {
                    trips.push(id.to_string());
                }
            }
            next_cycle = next_cycle + cycle;
        }
        for (id, relay) in relays.iter_mut() {
            if relay.fire(now).is_some() {
                trips.push(id.to_string());
            }
        }
        for id in trips {
            if id != own {
                return violation(Some(id));
            }
            relays.remove(own);
            open_at = Some(now + SimTime::from_secs(cfg.breaker_s));
        }
        if open_at == Some(now) {
            open_at = None;
            opened = true;
            state.branch_mut(own).unwrap().breaker_closed = false;
            match solve_fault(&state, &fault) {
                Ok(s) => sol = s,
                // Nothing feeds the fault any more.
                Err(_) => return None,
            }
        }
    }
}
