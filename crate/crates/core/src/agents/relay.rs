//! Three-stage directional overcurrent logic shared by branch agents and the
//! offline selectivity check.

use crate::grid::Direction;
use crate::time::SimTime;

/// Smoothing weight of the newest sample.
pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SettingGroup {
    pub group_id: u16,
    pub stage1_pickup: f64,
    /// Always zero; kept so the group reads like a relay setting sheet.
    pub stage1_delay: f64,
    pub stage2_pickup: f64,
    pub stage2_delay: f64,
    pub stage3_pickup: f64,
    pub stage3_tms: f64,
    pub directional: bool,
    pub reclose_enabled: bool,
    pub dead_time: f64,
}

impl SettingGroup {
    pub fn check(&self) -> Result<(), String> {
        if !(self.stage1_pickup > self.stage2_pickup
            && self.stage2_pickup > self.stage3_pickup
            && self.stage3_pickup > 0.0)
        {
            return Err("pickup ordering".into());
        }
        if self.stage2_delay < 0.3 - 1e-12 {
            return Err("stage 2 delay below 0.3 s".into());
        }
        if !(self.stage3_tms > 0.0) {
            return Err("non-positive tms".into());
        }
        Ok(())
    }

    /// Same settings, ignoring the id.
    pub fn same_settings(&self, other: &SettingGroup) -> bool {
        SettingGroup { group_id: other.group_id, ..self.clone() } == *other
    }
}

/// Standard inverse curve, seconds.
pub fn inverse_time(tms: f64, current: f64, pickup: f64) -> f64 {
    tms * 0.14 / ((current / pickup).powf(0.02) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub stage: u8,
    pub delay: f64,
}

/// Stage selection for a filtered current.
pub fn decide(group: &SettingGroup, current: f64, direction: Direction) -> Option<Trip> {
    if group.directional && direction == Direction::Reverse {
        return None;
    }
    if current >= group.stage1_pickup {
        Some(Trip { stage: 1, delay: group.stage1_delay })
    } else if current >= group.stage2_pickup {
        Some(Trip { stage: 2, delay: group.stage2_delay })
    } else if current >= group.stage3_pickup {
        Some(Trip { stage: 3, delay: inverse_time(group.stage3_tms, current, group.stage3_pickup) })
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pending {
    pub stage: u8,
    pub t_start: SimTime,
    pub delay: f64,
}

impl Pending {
    pub fn due(&self) -> SimTime {
        self.t_start + SimTime::from_secs(self.delay)
    }
}

/// Filter state plus the running trip timer.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayCore {
    pub alpha: f64,
    pub filtered: [f64; 3],
    pub pending: Option<Pending>,
}

impl Default for RelayCore {
    fn default() -> Self {
        RelayCore { alpha: DEFAULT_ALPHA, filtered: [0.0; 3], pending: None }
    }
}

impl RelayCore {
    /// Exponential smoothing; negative magnitudes are sensor artefacts.
    pub fn filter(&mut self, raw: [f64; 3]) {
        for (f, r) in self.filtered.iter_mut().zip(raw) {
            *f = self.alpha * r.max(0.0) + (1.0 - self.alpha) * *f;
        }
    }

    pub fn current(&self) -> f64 {
        self.filtered.iter().copied().fold(0.0, f64::max)
    }

    /// Folds a fresh decision into the timer. Returns the stage when the trip
    /// is due at `now`; the timer is then cleared.
    pub fn arm(&mut self, now: SimTime, decision: Option<Trip>) -> Option<u8> {
        match (decision, self.pending.as_mut()) {
            (None, _) => self.pending = None,
            (Some(d), Some(p)) if p.stage == d.stage => p.delay = d.delay,
            (Some(d), _) => self.pending = Some(Pending { stage: d.stage, t_start: now, delay: d.delay }),
        }
        self.fire(now)
    }

    /// Trips if the pending timer has run out by `now`.
    pub fn fire(&mut self, now: SimTime) -> Option<u8> {
        match self.pending {
            Some(p) if now >= p.due() => {
                self.pending = None;
                Some(p.stage)
            }
            _ => None,
        }
    }

    pub fn reset(&mut self) {
        self.filtered = [0.0; 3];
        self.pending = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group() -> SettingGroup {
        SettingGroup {
            group_id: 1,
            stage1_pickup: 1.5,
            stage1_delay: 0.0,
            stage2_pickup: 1.0,
            stage2_delay: 0.3,
            stage3_pickup: 0.5,
            stage3_tms: 0.1,
            directional: false,
            reclose_enabled: true,
            dead_time: 0.5,
        }
    }

    #[test]
    fn stage_one_above_pickup() {
        assert_eq!(decide(&group(), 2.0, Direction::Forward), Some(Trip { stage: 1, delay: 0.0 }));
    }

    #[test]
    fn inverse_curve_at_twice_pickup() {
        let t = decide(&group(), 0.999, Direction::Forward).unwrap();
        assert_eq!(t.stage, 3);
        let g = SettingGroup { stage2_pickup: 1.2, stage1_pickup: 2.0, ..group() };
        let t = decide(&g, 1.0, Direction::Forward).unwrap();
        assert_eq!(t.stage, 3);
        assert!((t.delay - 1.0030).abs() < 1e-4, "{}", t.delay);
    }

    #[test]
    fn reverse_blocks_directional_relay() {
        let g = SettingGroup { directional: true, ..group() };
        assert_eq!(decide(&g, 1e6, Direction::Reverse), None);
        assert!(decide(&g, 1e6, Direction::Undetermined).is_some());
    }

    #[test]
    fn smoothing() {
        let mut r = RelayCore::default();
        r.filter([2.0, 2.0, 2.0]);
        assert!((r.current() - 1.6).abs() < 1e-12);
        for _ in 0..20 {
            r.filter([3.0; 3]);
        }
        assert!((r.current() - 3.0).abs() < 1e-6);
        let mut r = RelayCore::default();
        r.filter([-0.1; 3]);
        assert_eq!(r.filtered, [0.0; 3]);
    }

    #[test]
    fn timer_keeps_start_within_a_stage_and_cancels() {
        let mut r = RelayCore::default();
        let d = Some(Trip { stage: 2, delay: 0.3 });
        assert_eq!(r.arm(SimTime::from_millis(10.0), d), None);
        assert_eq!(r.arm(SimTime::from_millis(20.0), d), None);
        assert_eq!(r.pending.unwrap().t_start, SimTime::from_millis(10.0));
        assert_eq!(r.arm(SimTime::from_millis(310.0), d), Some(2));
        assert_eq!(r.arm(SimTime::from_millis(320.0), d), None);
        assert_eq!(r.arm(SimTime::from_millis(330.0), None), None);
        assert!(r.pending.is_none());
    }

    #[test]
    fn stage_monotone_in_current() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = group();
        let rank = |t: Option<Trip>| t.map_or(4, |t| t.stage);
        for _ in 0..2000 {
            let a: f64 = rng.gen_range(0.0..3.0);
            let b: f64 = rng.gen_range(0.0..3.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (sl, sh) = (decide(&g, lo, Direction::Forward), decide(&g, hi, Direction::Forward));
            assert!(rank(sh) <= rank(sl));
            if let (Some(x), Some(y)) = (sl, sh) {
                assert!(y.delay <= x.delay + 1e-12);
            }
        }
    }

    #[test]
    fn inverse_curve_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..=1000 {
            let i = 0.5 * (1.0 + k as f64 * 0.01);
            let t = inverse_time(0.1, i, 0.5);
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn directional_block_fuzz() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = SettingGroup { directional: true, ..group() };
        let mut r = RelayCore::default();
        for k in 0..1000u64 {
            let i = rng.gen_range(0.0..1e4);
            r.filter([i; 3]);
            let d = decide(&g, r.current(), Direction::Reverse);
            assert_eq!(r.arm(SimTime(k * 10_000), d), None);
        }
    }
}
