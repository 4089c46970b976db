//! Scenario scripts.
//!
//! ```text
//! at 0.10 fault B2 pos=0.5 zf=0+j0 permanent
//! at 0.80 clear B2
//! at 1.00 dg CCHP off
//! at 1.20 dg CESS p=0.2
//! at 1.50 load L4 off
//! at 2.00 breaker B6 open
//! ```

use num_complex::Complex64;

use super::{SimConfig, SimError};
use crate::agents::TimerKind;
use crate::grid::{FaultSpec, Network};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum DgChange {
    On,
    Off,
    P(f64),
    Q(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEventKind {
    FaultApply(FaultSpec),
    FaultClear(String),
    Dg { id: String, change: DgChange },
    Load { id: String, connected: bool },
    Breaker { branch: String, open: bool },
    MeasureCycle,
    MessageDelivery,
    TimerExpiry { agent: String, timer: TimerKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t: SimTime,
    pub kind: SimEventKind,
}

fn parse_zf(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let b = s.as_bytes();
    let split = (1..b.len()).find(|&i| matches!(b[i], b'+' | b'-') && !matches!(b[i - 1], b'e' | b'E'));
    match split {
        None => s.parse().ok().map(|r| Complex64::new(r, 0.0)),
        Some(i) => {
            let (re, im) = s.split_at(i);
            let sign = if im.starts_with('-') { -1.0 } else { 1.0 };
            let x: f64 = im[1..].strip_prefix('j')?.parse().ok()?;
            Some(Complex64::new(re.parse().ok()?, sign * x))
        }
    }
}

/// Parses the scripted events only, in file order.
pub fn parse_scenario(text: &str, net: &Network) -> Result<Vec<SimEvent>, SimError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let bad = |reason: String| SimError::Parse { line, reason };
        if f.len() < 4 || f[0] != "at" {
            return Err(bad("expected `at <seconds> <verb> <element> ...`".into()));
        }
        let t: f64 = f[1].parse().map_err(|_| bad(format!("bad time {:?}", f[1])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(bad(format!("bad time {:?}", f[1])));
        }
        let t = SimTime::from_secs(t);
        let id = f[3].to_string();
        let rest = &f[4..];
        let known_branch = || net.branch(&id).map(|_| ()).ok_or_else(|| SimError::UnknownElement(id.clone()));
        let kind = match f[2] {
            "fault" => {
                known_branch()?;
                let mut spec = FaultSpec { branch_id: id.clone(), position: 0.5, z_fault: Complex64::new(0.0, 0.0), permanent: false };
                for tok in rest {
                    if *tok == "permanent" {
                        spec.permanent = true;
                    } else if let Some(v) = tok.strip_prefix("pos=") {
                        spec.position = v.parse().ok().filter(|p: &f64| (0.0..=1.0).contains(p))
                            .ok_or_else(|| bad(format!("pos must be in [0, 1], found {v:?}")))?;
                    } else if let Some(v) = tok.strip_prefix("zf=") {
                        spec.z_fault = parse_zf(v).ok_or_else(|| bad(format!("bad fault impedance {v:?}")))?;
                    } else {
                        return Err(bad(format!("unexpected {tok:?}")));
                    }
                }
                SimEventKind::FaultApply(spec)
            }
            "clear" => {
                known_branch()?;
                SimEventKind::FaultClear(id)
            }
            "dg" => {
                if !net.source(&id).is_some_and(|s| s.kind.is_dg()) {
                    return Err(SimError::UnknownElement(id));
                }
                let change = match rest {
                    ["on"] => DgChange::On,
                    ["off"] => DgChange::Off,
                    [kv] => {
                        let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite());
                        if let Some(p) = kv.strip_prefix("p=").and_then(num) {
                            DgChange::P(p)
                        } else if let Some(q) = kv.strip_prefix("q=").and_then(num) {
                            DgChange::Q(q)
                        } else {
                            return Err(bad(format!("unexpected {kv:?}")));
                        }
                    }
                    _ => return Err(bad("dg expects on, off, p=<pu> or q=<pu>".into())),
                };
                SimEventKind::Dg { id, change }
            }
            "load" => {
                if net.load(&id).is_none() {
                    return Err(SimError::UnknownElement(id));
                }
                let connected = match rest {
                    ["on"] => true,
                    ["off"] => false,
                    _ => return Err(bad("load expects on or off".into())),
                };
                SimEventKind::Load { id, connected }
            }
            "breaker" => {
                known_branch()?;
                let open = match rest {
                    ["open"] => true,
                    ["close"] => false,
                    _ => return Err(bad("breaker expects open or close".into())),
                };
                SimEventKind::Breaker { branch: id, open }
            }
            other => return Err(bad(format!("unknown verb {other:?}"))),
        };
        out.push(SimEvent { t, kind });
    }
    Ok(out)
}

/// Scripted events, stably sorted by time, followed by one measurement
/// cycle per `cfg.cycle` up to the horizon. Scripted events at a cycle
/// instant are handled before that cycle.
pub fn load_scenario(text: &str, net: &Network, cfg: &SimConfig) -> Result<Vec<SimEvent>, SimError> {
    let mut events = parse_scenario(text, net)?;
    events.sort_by_key(|e| e.t);
    let mut t = SimTime::ZERO;
    while t < cfg.horizon {
        events.push(SimEvent { t, kind: SimEventKind::MeasureCycle });
        t = t + cfg.cycle;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_impedance_forms() {
        assert_eq!(parse_zf("0.0"), Some(Complex64::new(0.0, 0.0)));
        assert_eq!(parse_zf("0.1+j0.2"), Some(Complex64::new(0.1, 0.2)));
        assert_eq!(parse_zf("0.1-j0.2"), Some(Complex64::new(0.1, -0.2)));
        assert_eq!(parse_zf("1e-3+j0"), Some(Complex64::new(1e-3, 0.0)));
        assert_eq!(parse_zf("0.1+0.2"), None);
    }
}
