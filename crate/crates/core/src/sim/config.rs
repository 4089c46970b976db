//! Run configuration: plain `key=value` lines.

use super::SimError;
use crate::agents::CentralConfig;
use crate::comms::LatencyConfig;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cycle: SimTime,
    pub breaker: SimTime,
    pub latency: LatencyConfig,
    pub horizon: SimTime,
    pub central: CentralConfig,
    pub alpha: f64,
    pub uv_threshold: f64,
    pub uv_time: SimTime,
    pub reclaim: SimTime,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cycle: SimTime::from_millis(10.0),
            breaker: SimTime::from_millis(40.0),
            latency: LatencyConfig::default(),
            horizon: SimTime::from_secs(3.0),
            central: CentralConfig::default(),
            alpha: crate::agents::relay::DEFAULT_ALPHA,
            uv_threshold: 0.5,
            uv_time: SimTime::from_millis(160.0),
            reclaim: SimTime::from_millis(200.0),
        }
    }
}

impl SimConfig {
    /// Recognised keys: cycle_ms, breaker_ms, latency_tt_ms, latency_tr_ms,
    /// latency_rc_ms, latency_bb_ms, jitter_seed, horizon_s, f0, k_f, alpha,
    /// uv_threshold, uv_time_ms, reclaim_ms. `#` starts a comment.
    pub fn parse(text: &str) -> Result<SimConfig, SimError> {
        let mut cfg = SimConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| SimError::Config(format!("line {}: expected key=value", idx + 1)))?;
            let num = || -> Result<f64, SimError> {
                match value.parse::<f64>() {
                    Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                    _ => Err(SimError::Config(format!("line {}: {key} needs a non-negative number", idx + 1))),
                }
            };
            let positive = || -> Result<f64, SimError> {
                let v = num()?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(SimError::Config(format!("line {}: {key} must be positive", idx + 1)))
                }
            };
            match key {
                "cycle_ms" => cfg.cycle = SimTime::from_millis(positive()?),
                "breaker_ms" => cfg.breaker = SimTime::from_millis(num()?),
                "latency_tt_ms" => cfg.latency.terminal_terminal = SimTime::from_millis(num()?),
                "latency_tr_ms" => cfg.latency.terminal_regional = SimTime::from_millis(num()?),
                "latency_rc_ms" => cfg.latency.regional_central = SimTime::from_millis(num()?),
                "latency_bb_ms" => cfg.latency.blackboard = SimTime::from_millis(num()?),
                "jitter_seed" => {
                    cfg.latency.jitter_seed = Some(value.parse().map_err(|_| {
                        SimError::Config(format!("line {}: jitter_seed needs an unsigned integer", idx + 1))
                    })?)
                }
                "horizon_s" => cfg.horizon = SimTime::from_secs(num()?),
                "f0" => cfg.central.f0 = positive()?,
                "k_f" => cfg.central.k_f = positive()?,
                "alpha" => {
                    let a = positive()?;
                    if a > 1.0 {
                        return Err(SimError::Config(format!("line {}: alpha must be in (0, 1]", idx + 1)));
                    }
                    cfg.alpha = a;
                }
                "uv_threshold" => cfg.uv_threshold = num()?,
                "uv_time_ms" => cfg.uv_time = SimTime::from_millis(num()?),
                "reclaim_ms" => cfg.reclaim = SimTime::from_millis(num()?),
                other => return Err(SimError::Config(format!("line {}: unknown key {other}", idx + 1))),
            }
        }
        Ok(cfg)
    }
}
