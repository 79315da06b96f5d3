use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable-phase learning rate from parameter count `n` and token count `d`,
/// both in billions.
pub fn stable_lr(n_billions: f64, d_billions: f64) -> Result<f64> {
    if !(n_billions > 0.0 && d_billions > 0.0) {
        return Err(Error::Config("parameter and token counts must be positive".into()));
    }
    Ok(1e-4 * 38.4588 * n_billions.powf(-0.2219) * d_billions.powf(-0.3509))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrKind {
    /// Warmup then constant.
    Ws,
    /// Warmup, constant, linear decay to the floor.
    Wsd,
    /// Warmup then cosine to the floor.
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub kind: LrKind,
    pub warmup: usize,
    /// Constant span of WSD. Ignored by other kinds.
    pub stable: usize,
    pub total: usize,
    pub peak: f64,
    #[serde(default = "default_floor")]
    pub floor_fraction: f64,
}

fn default_floor() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn new(kind: LrKind, warmup: usize, stable: usize, total: usize, peak: f64) -> Result<Self> {
        let s = Self { kind, warmup, stable, total, peak, floor_fraction: default_floor() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0) {
            return Err(Error::Config(format!("peak learning rate {} must be positive", self.peak)));
        }
        if !(0.0..=1.0).contains(&self.floor_fraction) {
            return Err(Error::Config(format!("floor fraction {} outside [0, 1]", self.floor_fraction)));
        }
        let used = self.warmup + if self.kind == LrKind::Wsd { self.stable } else { 0 };
        if self.total == 0 || used > self.total {
            return Err(Error::Config(format!("phases ({used} steps) exceed total {}", self.total)));
        }
        Ok(())
    }

    pub fn decay_steps(&self) -> usize {
        match self.kind {
            LrKind::Wsd => self.total - self.warmup - self.stable,
            LrKind::Cosine => self.total - self.warmup,
            LrKind::Ws | LrKind::Constant => 0,
        }
    }

    /// Learning rate at 0-based `step`. The last step of a decay phase sits
    /// exactly on the floor.
    pub fn at(&self, step: usize) -> f64 {
        let floor = self.floor_fraction * self.peak;
        if self.kind == LrKind::Constant {
            return self.peak;
        }
        if step < self.warmup {
            return self.peak * step as f64 / self.warmup as f64;
        }
        let decay_start = match self.kind {
            LrKind::Wsd => self.warmup + self.stable,
            LrKind::Cosine => self.warmup,
            _ => return self.peak,
        };
        let len = self.decay_steps();
        if step < decay_start || len == 0 {
            return self.peak;
        }
        let progress = if len == 1 {
            1.0
        } else {
            ((step - decay_start) as f64 / (len - 1) as f64).min(1.0)
        };
        match self.kind {
            LrKind::Wsd => self.peak + (floor - self.peak) * progress,
            _ => floor + 0.5 * (self.peak - floor) * (1.0 + (PI * progress).cos()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_lr_formula() {
        assert_eq!(stable_lr(1.0, 1.0).unwrap(), 38.4588e-4);
        let q = stable_lr(0.596, 12.0).unwrap();
        let l = stable_lr(0.762, 15.2).unwrap();
        assert!((q / 1.801e-3 - 1.0).abs() < 0.01, "{q}");
        assert!((l / 1.573e-3 - 1.0).abs() < 0.01, "{l}");
        assert!(stable_lr(0.0, 1.0).is_err());
    }

    #[test]
    fn wsd_shape() {
        let s = LrSchedule::new(LrKind::Wsd, 10, 50, 100, 2e-3).unwrap();
        assert_eq!(s.at(0), 0.0);
        assert_eq!(s.at(5), 1e-3);
        assert_eq!(s.at(10), 2e-3);
        assert_eq!(s.at(59), 2e-3);
        assert!((s.at(99) - 2e-4).abs() < 1e-12 * 2e-3);
        assert!(s.at(80) < s.at(70));
    }

    #[test]
    fn cosine_midpoint() {
        // Decay span of 101 steps puts the midpoint on step 50 after warmup.
        let s = LrSchedule::new(LrKind::Cosine, 10, 0, 111, 1.0).unwrap();
        assert!((s.at(60) - 0.55).abs() < 1e-12);
        assert!((s.at(110) - 0.1).abs() < 1e-12);
        assert_eq!(s.at(10), 1.0);
    }

    #[test]
    fn ws_and_constant() {
        let ws = LrSchedule::new(LrKind::Ws, 4, 0, 20, 1.0).unwrap();
        assert_eq!(ws.at(2), 0.5);
        assert_eq!(ws.at(19), 1.0);
        let c = LrSchedule::new(LrKind::Constant, 4, 0, 20, 0.3).unwrap();
        assert_eq!(c.at(0), 0.3);
        assert!(LrSchedule::new(LrKind::Wsd, 60, 50, 100, 1.0).is_err());
    }
}
