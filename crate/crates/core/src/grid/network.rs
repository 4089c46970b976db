//! Network elements and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::GridError;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    /// Line voltage in kV.
    pub v_nominal: f64,
}

/// Which end of a branch a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    From,
    To,
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::From => f.write_str("from"),
            End::To => f.write_str("to"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Series impedance in per-unit.
    pub z: Complex64,
    pub breaker_closed: bool,
    /// End hosting the breaker and relay. Always `End::From` in files.
    pub relay_end: End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    GridSupply,
    Pv,
    Cchp,
    Cess,
    FuelCell,
}

impl SourceKind {
    /// Converter-interfaced sources are modelled as clamped current sources.
    pub fn is_inverter(self) -> bool {
        matches!(self, SourceKind::Pv | SourceKind::Cess | SourceKind::FuelCell)
    }

    /// Sources the central agent may re-dispatch upward.
    pub fn is_dispatchable(self) -> bool {
        matches!(self, SourceKind::Cess | SourceKind::FuelCell)
    }

    pub fn is_dg(self) -> bool {
        self != SourceKind::GridSupply
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::GridSupply => "GridSupply",
            SourceKind::Pv => "PV",
            SourceKind::Cchp => "CCHP",
            SourceKind::Cess => "CESS",
            SourceKind::FuelCell => "FuelCell",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid" | "gridsupply" => Some(SourceKind::GridSupply),
            "pv" => Some(SourceKind::Pv),
            "cchp" => Some(SourceKind::Cchp),
            "cess" => Some(SourceKind::Cess),
            "fuelcell" => Some(SourceKind::FuelCell),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub id: String,
    pub bus: String,
    pub kind: SourceKind,
    pub emf: Complex64,
    pub z_int: Complex64,
    pub i_limit: f64,
    pub online: bool,
    pub p_out: f64,
    pub q_out: f64,
    pub p_max: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub p: f64,
    pub q: f64,
    /// Lower values are shed first.
    pub shed_priority: i64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub branch_id: String,
    /// Fraction of the branch length measured from the from-end.
    pub position: f64,
    pub z_fault: Complex64,
    pub permanent: bool,
}

impl FaultSpec {
    pub fn bolted(branch_id: impl Into<String>, position: f64) -> Self {
        FaultSpec {
            branch_id: branch_id.into(),
            position,
            z_fault: Complex64::new(0.0, 0.0),
            permanent: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub sources: Vec<Source>,
    pub loads: Vec<Load>,
}

impl Network {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn branch(&self, id: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn branch_mut(&mut self, id: &str) -> Option<&mut Branch> {
        self.branches.iter_mut().find(|b| b.id == id)
    }

    pub fn source(&self, id: &str) -> Option<&Source> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn source_mut(&mut self, id: &str) -> Option<&mut Source> {
        self.sources.iter_mut().find(|s| s.id == id)
    }

    pub fn load(&self, id: &str) -> Option<&Load> {
        self.loads.iter().find(|l| l.id == id)
    }

    pub fn load_mut(&mut self, id: &str) -> Option<&mut Load> {
        self.loads.iter_mut().find(|l| l.id == id)
    }

    pub fn grid_supply(&self) -> &Source {
        self.sources
            .iter()
            .find(|s| s.kind == SourceKind::GridSupply)
            .expect("validated network has a grid supply")
    }

    /// Distributed generators sorted by id.
    pub fn dgs(&self) -> Vec<&Source> {
        let mut v: Vec<&Source> = self.sources.iter().filter(|s| s.kind.is_dg()).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Buses adjacent to `bus` through closed branches.
    pub fn neighbours(&self, bus: &str) -> Vec<&str> {
        let mut out = Vec::new();
        for br in self.branches.iter().filter(|b| b.breaker_closed) {
            if br.from_bus == bus {
                out.push(br.to_bus.as_str());
            } else if br.to_bus == bus {
                out.push(br.from_bus.as_str());
            }
        }
        out
    }

    /// Hop distance from `start` to every reachable bus, ignoring breaker state.
    pub fn hop_distances(&self, start: &str) -> BTreeMap<String, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(start.to_string(), 0);
        let mut frontier = vec![start.to_string()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for bus in &frontier {
                let d = dist[bus];
                for br in &self.branches {
                    let other = if &br.from_bus == bus {
                        &br.to_bus
                    } else if &br.to_bus == bus {
                        &br.from_bus
                    } else {
                        continue;
                    };
                    if !dist.contains_key(other) {
                        dist.insert(other.clone(), d + 1);
                        next.push(other.clone());
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Two branches are adjacent when they share a bus.
    pub fn branches_adjacent(&self, a: &str, b: &str) -> bool {
        match (self.branch(a), self.branch(b)) {
            (Some(x), Some(y)) if x.id != y.id => {
                x.from_bus == y.from_bus
                    || x.from_bus == y.to_bus
                    || x.to_bus == y.from_bus
                    || x.to_bus == y.to_bus
            }
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let invalid = |m: String| Err(GridError::Validation(m));
        if self.branches.is_empty() {
            return invalid("no branches".into());
        }
        let mut bus_ids = BTreeSet::new();
        for b in &self.buses {
            if !bus_ids.insert(b.id.as_str()) {
                return invalid(format!("duplicate bus id {}", b.id));
            }
            if !(b.v_nominal > 0.0) {
                return invalid(format!("bus {} has non-positive nominal voltage", b.id));
            }
        }
        let known = |id: &str| bus_ids.contains(id);
        let mut ids = BTreeSet::new();
        for br in &self.branches {
            if !ids.insert(br.id.as_str()) {
                return invalid(format!("duplicate branch id {}", br.id));
            }
            for end in [&br.from_bus, &br.to_bus] {
                if !known(end) {
                    return invalid(format!("branch {} references undeclared bus {}", br.id, end));
                }
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {} connects bus {} to itself", br.id, br.from_bus));
            }
            if !(br.z.norm() > 0.0) {
                return invalid(format!("branch {} has zero impedance", br.id));
            }
        }
        let mut ids = BTreeSet::new();
        let mut grid = 0;
        for s in &self.sources {
            if !ids.insert(s.id.as_str()) {
                return invalid(format!("duplicate source id {}", s.id));
            }
            if !known(&s.bus) {
                return invalid(format!("source {} references undeclared bus {}", s.id, s.bus));
            }
            if s.kind == SourceKind::GridSupply {
                grid += 1;
            }
            let e = s.emf.norm();
            if !(0.9..=1.1).contains(&e) {
                return invalid(format!("source {} emf {} outside [0.9, 1.1]", s.id, e));
            }
            if !(s.z_int.norm() > 0.0) {
                return invalid(format!("source {} has zero internal impedance", s.id));
            }
            if s.kind.is_inverter() && !(s.i_limit > 0.0) {
                return invalid(format!("inverter source {} needs a positive current limit", s.id));
            }
            if s.p_max < 0.0 || s.q_max < 0.0 {
                return invalid(format!("source {} has negative capability", s.id));
            }
        }
        match grid {
            0 => return invalid("no GridSupply source".into()),
            1 => {}
            _ => return invalid("more than one GridSupply source".into()),
        }
        let mut ids = BTreeSet::new();
        let mut prio = BTreeSet::new();
        for l in &self.loads {
            if !ids.insert(l.id.as_str()) {
                return invalid(format!("duplicate load id {}", l.id));
            }
            if !known(&l.bus) {
                return invalid(format!("load {} references undeclared bus {}", l.id, l.bus));
            }
            if l.p < 0.0 {
                return invalid(format!("load {} has negative demand", l.id));
            }
            if !prio.insert(l.shed_priority) {
                return invalid(format!("load {} reuses shed priority {}", l.id, l.shed_priority));
            }
        }
        Ok(())
    }

    /// Canonical text of the commissioning data. Operating state (breaker
    /// positions, DG on/off, load connection) is excluded.
    pub fn canonical_text(&self) -> String {
        let mut lines = Vec::new();
        for b in &self.buses {
            lines.push(format!("BUS {} {}", b.id, b.v_nominal));
        }
        for br in &self.branches {
            lines.push(format!(
                "BRANCH {} {} {} {} {}",
                br.id, br.from_bus, br.to_bus, br.z.re, br.z.im
            ));
        }
        for s in &self.sources {
            lines.push(format!(
                "SOURCE {} {} {} {} {} {} {} {} {} {} {}",
                s.id,
                s.bus,
                s.kind.as_str(),
                s.emf.norm(),
                s.z_int.re,
                s.z_int.im,
                s.i_limit,
                s.p_out,
                s.q_out,
                s.p_max,
                s.q_max
            ));
        }
        for l in &self.loads {
            lines.push(format!("LOAD {} {} {} {} {}", l.id, l.bus, l.p, l.q, l.shed_priority));
        }
        lines.sort();
        lines.join("\n")
    }

    /// Fingerprint used to tie a knowledge base to the network it was built for.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
