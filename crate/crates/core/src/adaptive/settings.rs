//! Coordinated settings for one DG status vector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use super::{CoordConfig, DgStatusVector};
use crate::agents::relay::{decide, inverse_time, SettingGroup};
use crate::grid::{solve_fault, Direction, End, FaultSpec, Network, I_NOISE_FLOOR};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasible {
    pub reason: String,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason)
    }
}

fn infeasible<T>(kind: &str, branch: &str) -> Result<T, Infeasible> {
    Err(Infeasible { reason: format!("{kind} ({branch})") })
}

/// Closed branches as a tree hanging off the grid-supply bus.
pub(crate) struct Radial {
    /// Children before parents.
    pub order: Vec<String>,
    pub children: BTreeMap<String, Vec<String>>,
    /// Buses at and below each branch's to-bus.
    pub below: BTreeMap<String, BTreeSet<String>>,
}

pub(crate) fn radial(net: &Network) -> Result<Radial, Infeasible> {
    let root = net.grid_supply().bus.clone();
    let closed: Vec<_> = net.branches.iter().filter(|b| b.breaker_closed).collect();
    let mut seen: BTreeSet<String> = BTreeSet::from([root.clone()]);
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut pre: Vec<String> = Vec::new();
    let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
    // (bus, branch feeding it)
    let mut stack: Vec<(String, Option<String>)> = vec![(root, None)];
    while let Some((bus, parent)) = stack.pop() {
        for br in &closed {
            if used.contains(&br.id) {
                continue;
            }
            if br.to_bus == bus || (br.from_bus == bus && seen.contains(&br.to_bus)) {
                return infeasible("topology", &br.id);
            }
            if br.from_bus != bus {
                continue;
            }
            used.insert(br.id.clone());
            seen.insert(br.to_bus.clone());
            pre.push(br.id.clone());
            children.entry(br.id.clone()).or_default();
            if let Some(p) = &parent {
                children.entry(p.clone()).or_default().push(br.id.clone());
            }
            stack.push((br.to_bus.clone(), Some(br.id.clone())));
        }
    }
    if let Some(br) = closed.iter().find(|b| !used.contains(&b.id)) {
        return infeasible("topology", &br.id);
    }
    let mut below: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let order: Vec<String> = pre.into_iter().rev().collect();
    for id in &order {
        let mut set = BTreeSet::from([net.branch(id).unwrap().to_bus.clone()]);
        for c in &children[id] {
            set.extend(below[c].iter().cloned());
        }
        below.insert(id.clone(), set);
    }
    Ok(Radial { order, children, below })
}

/// Keeps summed delays free of binary noise (0.9 rather than 0.8999...).
fn round_ns(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Settings for every closed branch with the DGs switched per `vector`, or
/// the first coordination rule that cannot be met.
pub fn compute_settings(
    net: &Network,
    vector: &DgStatusVector,
    cfg: &CoordConfig,
) -> Result<BTreeMap<String, SettingGroup>, Infeasible> {
    let net = vector.apply(net);
    let tree = radial(&net)?;
    let mut out: BTreeMap<String, SettingGroup> = BTreeMap::new();
    for id in &tree.order {
        let remote = match solve_fault(&net, &FaultSpec::bolted(id.clone(), 1.0)) {
            Ok(sol) => sol.current(id, End::From).unwrap_or_default().norm(),
            Err(_) => 0.0,
        };
        if remote < I_NOISE_FLOOR {
            return infeasible("no-source", id);
        }
        let kids: Vec<&SettingGroup> = tree.children[id].iter().map(|c| &out[c]).collect();
        let s1 = cfg.k_rel * remote;
        let (s2, s2_delay) = if kids.is_empty() {
            (cfg.k_coord * remote, cfg.grading_s)
        } else {
            (
                cfg.k_coord * kids.iter().map(|g| g.stage1_pickup).fold(0.0, f64::max),
                round_ns(kids.iter().map(|g| g.stage2_delay).fold(0.0, f64::max) + cfg.grading_s),
            )
        };

        let below = &tree.below[id];
        let load: Complex64 =
            net.loads.iter().filter(|l| below.contains(&l.bus)).map(|l| Complex64::new(l.p, l.q)).sum();
        let dg_online: Vec<_> = net.dgs().into_iter().filter(|s| s.online && below.contains(&s.bus)).collect();
        let gen: Complex64 = dg_online.iter().map(|s| Complex64::new(s.p_out, s.q_out)).sum();
        // DG output may fall anywhere between zero and dispatch.
        let i_load = load.norm().max((load - gen).norm());
        let s3 = cfg.load_factor * i_load.max(cfg.sensitivity_floor);

        if remote < s3 {
            return infeasible("sensitivity", id);
        }
        if !(s1 > s2 && s2 > s3) {
            return infeasible("ordering", id);
        }

        let mut tms = cfg.tms_min;
        const SAMPLES: usize = 400;
        for k in 1..=SAMPLES {
            let i = s3 * (s2 / s3).powf(k as f64 / SAMPLES as f64);
            let unit = inverse_time(1.0, i, s3);
            for g in &kids {
                if let Some(t) = decide(g, i, Direction::Forward) {
                    tms = tms.max((t.delay + cfg.grading_s) / unit * 1.02);
                }
            }
        }
        if tms > cfg.tms_max {
            return infeasible("grading", id);
        }

        let group = SettingGroup {
            group_id: 0,
            stage1_pickup: s1,
            stage1_delay: 0.0,
            stage2_pickup: s2,
            stage2_delay: s2_delay,
            stage3_pickup: s3,
            stage3_tms: tms,
            directional: !dg_online.is_empty(),
            reclose_enabled: true,
            dead_time: cfg.dead_time,
        };
        if let Err(e) = group.check() {
            return Err(Infeasible { reason: format!("ordering ({id}): {e}") });
        }
        out.insert(id.clone(), group);
    }
    Ok(out)
}
