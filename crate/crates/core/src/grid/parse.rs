//! Line-oriented network file reader.
//!
//! ```text
//! BUS <id> <kv>
//! BRANCH <id> <from> <to> <r_pu> <x_pu>
//! SOURCE <id> <bus> <kind> <emf_pu> <r_pu> <x_pu> <i_limit_pu> <online 0|1> <p_pu> <q_pu> <p_max> <q_max>
//! LOAD <id> <bus> <p_pu> <q_pu> <shed_priority>
//! ```

use std::collections::BTreeSet;

use num_complex::Complex64;

use super::network::{Branch, Bus, End, Load, Network, Source, SourceKind};
use super::GridError;

fn num(tok: &str, line: usize, what: &str) -> Result<f64, GridError> {
    let v: f64 = tok.parse().map_err(|_| GridError::Parse {
        line,
        reason: format!("{what}: expected a number, found {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(GridError::Parse { line, reason: format!("{what}: not finite") });
    }
    Ok(v)
}

fn flag(tok: &str, line: usize, what: &str) -> Result<bool, GridError> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(GridError::Parse { line, reason: format!("{what}: expected 0 or 1, found {tok:?}") }),
    }
}

fn arity(fields: &[&str], n: usize, line: usize) -> Result<(), GridError> {
    if fields.len() != n {
        return Err(GridError::Parse {
            line,
            reason: format!("{} expects {} fields, found {}", fields[0], n - 1, fields.len() - 1),
        });
    }
    Ok(())
}

/// Parses and validates a network description.
pub fn build_network(text: &str) -> Result<Network, GridError> {
    let mut net = Network::default();
    // (line, element id, referenced bus) for the dangling-reference pass.
    let mut refs: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        match f[0] {
            "BUS" => {
                arity(&f, 3, line)?;
                net.buses.push(Bus { id: f[1].to_string(), v_nominal: num(f[2], line, "kv")? });
            }
            "BRANCH" => {
                arity(&f, 6, line)?;
                refs.push((line, f[1].to_string(), f[2].to_string()));
                refs.push((line, f[1].to_string(), f[3].to_string()));
                net.branches.push(Branch {
                    id: f[1].to_string(),
                    from_bus: f[2].to_string(),
                    to_bus: f[3].to_string(),
                    z: Complex64::new(num(f[4], line, "r_pu")?, num(f[5], line, "x_pu")?),
                    breaker_closed: true,
                    relay_end: End::From,
                });
            }
            "SOURCE" => {
                arity(&f, 13, line)?;
                let kind = SourceKind::parse(f[3]).ok_or_else(|| GridError::Parse {
                    line,
                    reason: format!("unknown source kind {:?}", f[3]),
                })?;
                refs.push((line, f[1].to_string(), f[2].to_string()));
                net.sources.push(Source {
                    id: f[1].to_string(),
                    bus: f[2].to_string(),
                    kind,
                    emf: Complex64::new(num(f[4], line, "emf_pu")?, 0.0),
                    z_int: Complex64::new(num(f[5], line, "r_pu")?, num(f[6], line, "x_pu")?),
                    i_limit: num(f[7], line, "i_limit_pu")?,
                    online: flag(f[8], line, "online")?,
                    p_out: num(f[9], line, "p_pu")?,
                    q_out: num(f[10], line, "q_pu")?,
                    p_max: num(f[11], line, "p_max")?,
                    q_max: num(f[12], line, "q_max")?,
                });
            }
            "LOAD" => {
                arity(&f, 6, line)?;
                let prio: i64 = f[5].parse().map_err(|_| GridError::Parse {
                    line,
                    reason: format!("shed_priority: expected an integer, found {:?}", f[5]),
                })?;
                refs.push((line, f[1].to_string(), f[2].to_string()));
                net.loads.push(Load {
                    id: f[1].to_string(),
                    bus: f[2].to_string(),
                    p: num(f[3], line, "p_pu")?,
                    q: num(f[4], line, "q_pu")?,
                    shed_priority: prio,
                    connected: true,
                });
            }
            other => {
                return Err(GridError::Parse { line, reason: format!("unknown record {other:?}") });
            }
        }
    }

    let buses: BTreeSet<&str> = net.buses.iter().map(|b| b.id.as_str()).collect();
    for (line, id, bus) in &refs {
        if !buses.contains(bus.as_str()) {
            return Err(GridError::Validation(format!(
                "line {line}: {id} references undeclared bus {bus}"
            )));
        }
    }
    net.validate()?;
    Ok(net)
}

/// Renders a network back into the file format. Operating state is written
/// as stored; breakers are not part of the format.
pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    for b in &net.buses {
        out.push_str(&format!("BUS {} {}\n", b.id, b.v_nominal));
    }
    for br in &net.branches {
        out.push_str(&format!(
            "BRANCH {} {} {} {} {}\n",
            br.id, br.from_bus, br.to_bus, br.z.re, br.z.im
        ));
    }
    for s in &net.sources {
        out.push_str(&format!(
            "SOURCE {} {} {} {} {} {} {} {} {} {} {} {}\n",
            s.id,
            s.bus,
            s.kind.as_str(),
            s.emf.re,
            s.z_int.re,
            s.z_int.im,
            s.i_limit,
            u8::from(s.online),
            s.p_out,
            s.q_out,
            s.p_max,
            s.q_max
        ));
    }
    for l in &net.loads {
        out.push_str(&format!("LOAD {} {} {} {} {}\n", l.id, l.bus, l.p, l.q, l.shed_priority));
    }
    out
}
