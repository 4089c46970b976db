//! The knowledge base: verified setting groups per DG status vector.

use std::collections::BTreeMap;

use super::{compute_settings, enumerate_vectors, verify_selectivity, AdaptiveError, CoordConfig, DgStatusVector};
use crate::agents::relay::SettingGroup;
use crate::grid::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub network_hash: String,
    pub n_dgs: usize,
    /// Bit string -> branch -> settings.
    pub entries: BTreeMap<String, BTreeMap<String, SettingGroup>>,
    /// Bit string -> reason.
    pub infeasible: BTreeMap<String, String>,
}

/// Runs the full study. Group ids are numbered per branch in order of first
/// appearance over the enumerated vectors.
pub fn build_knowledge(net: &Network, cfg: &CoordConfig) -> Result<KnowledgeBase, AdaptiveError> {
    let vectors = enumerate_vectors(net)?;
    let mut kb = KnowledgeBase {
        network_hash: net.fingerprint(),
        n_dgs: net.dgs().len(),
        entries: BTreeMap::new(),
        infeasible: BTreeMap::new(),
    };
    let mut seen: BTreeMap<String, Vec<SettingGroup>> = BTreeMap::new();
    for v in &vectors {
        let bits = v.bits();
        let settings = match compute_settings(net, v, cfg) {
            Ok(s) => s,
            Err(e) => {
                kb.infeasible.insert(bits, e.reason);
                continue;
            }
        };
        let violations = verify_selectivity(net, v, &settings, cfg);
        if let Some(first) = violations.first() {
            kb.infeasible.insert(bits, format!("selectivity ({first})"));
            continue;
        }
        let mut numbered = BTreeMap::new();
        for (br, mut g) in settings {
            let list = seen.entry(br.clone()).or_default();
            let pos = match list.iter().position(|x| x.same_settings(&g)) {
                Some(p) => p,
                None => {
                    list.push(g.clone());
                    list.len() - 1
                }
            };
            g.group_id = pos as u16 + 1;
            numbered.insert(br, g);
        }
        kb.entries.insert(bits, numbered);
    }
    Ok(kb)
}

fn fmt_group(bits: &str, branch: &str, g: &SettingGroup) -> String {
    format!(
        "SET\t{bits}\t{branch}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        g.group_id,
        g.stage1_pickup,
        g.stage2_pickup,
        g.stage2_delay,
        g.stage3_pickup,
        g.stage3_tms,
        u8::from(g.directional),
        u8::from(g.reclose_enabled),
        g.dead_time
    )
}

impl KnowledgeBase {
    pub fn check_network(&self, net: &Network) -> Result<(), AdaptiveError> {
        let found = net.fingerprint();
        if found != self.network_hash {
            return Err(AdaptiveError::HashMismatch { expected: self.network_hash.clone(), found });
        }
        Ok(())
    }

    pub fn lookup(&self, vector: &DgStatusVector) -> Result<&BTreeMap<String, SettingGroup>, AdaptiveError> {
        let bits = vector.bits();
        if let Some(e) = self.entries.get(&bits) {
            return Ok(e);
        }
        match self.infeasible.get(&bits) {
            Some(reason) => Err(AdaptiveError::InfeasibleVector { bits, reason: reason.clone() }),
            None => Err(AdaptiveError::MissingVector(bits)),
        }
    }

    /// Every distinct group stored for one branch, by id.
    pub fn groups_for(&self, branch: &str) -> BTreeMap<u16, SettingGroup> {
        self.entries
            .values()
            .filter_map(|m| m.get(branch))
            .map(|g| (g.group_id, g.clone()))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (bits, m) in &self.entries {
            for (br, g) in m {
                lines.push(fmt_group(bits, br, g));
            }
        }
        for (bits, reason) in &self.infeasible {
            lines.push(format!("INFEASIBLE\t{bits}\t{reason}"));
        }
        lines.sort();
        let mut out = format!("KB\t{}\t{}\n", self.network_hash, self.n_dgs);
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<KnowledgeBase, AdaptiveError> {
        let err = |line: usize, reason: &str| AdaptiveError::Parse { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let h: Vec<&str> = header.split('\t').collect();
        if h.len() != 3 || h[0] != "KB" {
            return Err(err(1, "expected header KB <hash> <n_dgs>"));
        }
        let n_dgs: usize = h[2].parse().map_err(|_| err(1, "bad DG count"))?;
        let mut kb = KnowledgeBase {
            network_hash: h[1].to_string(),
            n_dgs,
            entries: BTreeMap::new(),
            infeasible: BTreeMap::new(),
        };
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.is_empty() {
                continue;
            }
            let f: Vec<&str> = raw.split('\t').collect();
            match f[0] {
                "SET" if f.len() == 12 => {
                    let num = |k: usize| f[k].parse::<f64>().map_err(|_| err(line, "bad number"));
                    let flag = |k: usize| match f[k] {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        _ => Err(err(line, "bad flag")),
                    };
                    let g = SettingGroup {
                        group_id: f[3].parse().map_err(|_| err(line, "bad group id"))?,
                        stage1_pickup: num(4)?,
                        stage1_delay: 0.0,
                        stage2_pickup: num(5)?,
                        stage2_delay: num(6)?,
                        stage3_pickup: num(7)?,
                        stage3_tms: num(8)?,
                        directional: flag(9)?,
                        reclose_enabled: flag(10)?,
                        dead_time: num(11)?,
                    };
                    g.check().map_err(|e| err(line, &e))?;
                    kb.entries.entry(f[1].to_string()).or_default().insert(f[2].to_string(), g);
                }
                "INFEASIBLE" if f.len() == 3 => {
                    kb.infeasible.insert(f[1].to_string(), f[2].to_string());
                }
                _ => return Err(err(line, "unrecognised record")),
            }
        }
        Ok(kb)
    }
}
