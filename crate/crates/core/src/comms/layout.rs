//! Agent registry, areas and selective link tables.

use std::collections::{BTreeMap, BTreeSet};

use super::AgentKind;
use crate::grid::Network;

pub const CENTRAL_ID: &str = "C";
/// Radio group joining the central agent with every regional agent.
pub const REGIONAL_GROUP: &str = "REG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRef {
    pub id: String,
    pub kind: AgentKind,
    pub area_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkTable {
    /// Unordered pairs stored with the smaller id first.
    pub direct_links: BTreeSet<(String, String)>,
    pub groups: BTreeMap<String, Vec<String>>,
}

impl LinkTable {
    pub fn link(&mut self, a: &str, b: &str) {
        let pair = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.direct_links.insert(pair);
    }

    pub fn linked(&self, a: &str, b: &str) -> bool {
        let pair = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.direct_links.contains(&pair)
    }
}

/// Who is who: agents, areas, links and each terminal's home regional agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentLayout {
    pub agents: BTreeMap<String, AgentRef>,
    pub links: LinkTable,
    /// Terminal id -> regional agent it reports to (the nearest one).
    pub home: BTreeMap<String, String>,
    /// Area id -> regional agent id.
    pub area_regional: BTreeMap<String, String>,
}

impl AgentLayout {
    /// One area per feeder (branches below one substation branch). Each area
    /// also takes in the branches adjacent to it, so neighbouring areas
    /// overlap. Terminals report to the regional agent of their own feeder.
    pub fn for_network(net: &Network) -> AgentLayout {
        let root = net.grid_supply().bus.clone();
        let mut heads: Vec<&str> = net
            .branches
            .iter()
            .filter(|b| b.from_bus == root || b.to_bus == root)
            .map(|b| b.id.as_str())
            .collect();
        heads.sort();

        // Feeder of each bus, found by walking out from each head branch.
        let mut bus_feeder: BTreeMap<String, usize> = BTreeMap::new();
        for (f, head) in heads.iter().enumerate() {
            let br = net.branch(head).unwrap();
            let start = if br.from_bus == root { &br.to_bus } else { &br.from_bus };
            let mut stack = vec![start.clone()];
            while let Some(bus) = stack.pop() {
                if bus == root || bus_feeder.contains_key(&bus) {
                    continue;
                }
                bus_feeder.insert(bus.clone(), f);
                for b in &net.branches {
                    if b.from_bus == bus {
                        stack.push(b.to_bus.clone());
                    } else if b.to_bus == bus {
                        stack.push(b.from_bus.clone());
                    }
                }
            }
        }
        let n_areas = heads.len().max(1);
        let feeder_of_bus = |bus: &str| bus_feeder.get(bus).copied().unwrap_or(0);
        let feeder_of_branch = |id: &str| {
            let b = net.branch(id).unwrap();
            if b.from_bus == root {
                feeder_of_bus(&b.to_bus)
            } else {
                feeder_of_bus(&b.from_bus)
            }
        };

        let area_id = |f: usize| format!("A{}", f + 1);
        let reg_id = |f: usize| format!("R{}", f + 1);
        let mut layout = AgentLayout::default();
        let mut members: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n_areas];

        for br in &net.branches {
            let f = feeder_of_branch(&br.id);
            members[f].insert(br.id.clone());
            layout.home.insert(br.id.clone(), reg_id(f));
        }
        // Overlap: pull in branches adjacent to each area.
        let core: Vec<BTreeSet<String>> = members.clone();
        for (f, set) in core.iter().enumerate() {
            for br in &net.branches {
                if set.iter().any(|m| net.branches_adjacent(m, &br.id)) {
                    members[f].insert(br.id.clone());
                }
            }
        }
        for dg in net.dgs() {
            let f = feeder_of_bus(&dg.bus);
            members[f].insert(dg.id.clone());
            layout.home.insert(dg.id.clone(), reg_id(f));
        }

        for br in &net.branches {
            let areas = (0..n_areas).filter(|&f| members[f].contains(&br.id)).map(area_id).collect();
            layout.agents.insert(
                br.id.clone(),
                AgentRef { id: br.id.clone(), kind: AgentKind::TerminalBranch, area_ids: areas },
            );
        }
        for dg in net.dgs() {
            let areas = (0..n_areas).filter(|&f| members[f].contains(&dg.id)).map(area_id).collect();
            layout
                .agents
                .insert(dg.id.clone(), AgentRef { id: dg.id.clone(), kind: AgentKind::TerminalDg, area_ids: areas });
        }
        for f in 0..n_areas {
            layout.agents.insert(
                reg_id(f),
                AgentRef { id: reg_id(f), kind: AgentKind::Regional, area_ids: vec![area_id(f)] },
            );
            layout.area_regional.insert(area_id(f), reg_id(f));
            let mut group: Vec<String> = vec![reg_id(f)];
            group.extend(members[f].iter().cloned());
            layout.links.groups.insert(area_id(f), group);
            layout.links.link(&reg_id(f), CENTRAL_ID);
        }
        layout.agents.insert(
            CENTRAL_ID.to_string(),
            AgentRef { id: CENTRAL_ID.to_string(), kind: AgentKind::Central, area_ids: vec![] },
        );
        let mut reg_group = vec![CENTRAL_ID.to_string()];
        reg_group.extend((0..n_areas).map(reg_id));
        layout.links.groups.insert(REGIONAL_GROUP.to_string(), reg_group);

        for a in &net.branches {
            for b in &net.branches {
                if a.id < b.id && net.branches_adjacent(&a.id, &b.id) {
                    layout.links.link(&a.id, &b.id);
                }
            }
        }
        for (term, reg) in &layout.home {
            layout.links.link(term, reg);
        }
        layout
    }

    pub fn kind(&self, id: &str) -> Option<AgentKind> {
        self.agents.get(id).map(|a| a.kind)
    }

    pub fn regionals(&self) -> Vec<String> {
        self.agents.values().filter(|a| a.kind == AgentKind::Regional).map(|a| a.id.clone()).collect()
    }

    /// Members of an area group other than its regional agent.
    pub fn area_members(&self, area: &str) -> Vec<String> {
        self.links
            .groups
            .get(area)
            .map(|g| g.iter().filter(|m| self.kind(m).is_some_and(|k| k.is_terminal())).cloned().collect())
            .unwrap_or_default()
    }

    /// Area ids served by a regional agent.
    pub fn areas_of_regional(&self, reg: &str) -> Vec<String> {
        self.area_regional.iter().filter(|(_, r)| *r == reg).map(|(a, _)| a.clone()).collect()
    }
}
