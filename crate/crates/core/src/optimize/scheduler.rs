// SPDX-License-Identifier: Apache-2.0

//! Cosine annealing with restart on loss plateaus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub t_max: usize,
    pub eta_min: f64,
    /// Number of consecutive loss differences inspected.
    pub plateau_window: usize,
    pub min_change: f64,
    /// Restarts only happen while the loss is above this value.
    pub plateau_threshold: f64,
    pub restart: bool,
    /// Keep η at its maximum instead of annealing.
    pub constant: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            t_max: 50,
            eta_min: 0.0,
            plateau_window: 6,
            min_change: 0.01,
            plateau_threshold: 0.1,
            restart: true,
            constant: false,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self, eta_max: f64) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::invalid("t_max", "must be at least 1"));
        }
        if !(0.0 <= self.eta_min && self.eta_min <= eta_max) {
            return Err(Error::invalid("eta_min", format!("must lie in [0, {eta_max}]")));
        }
        if self.plateau_window == 0 {
            return Err(Error::invalid("plateau_window", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub config: SchedulerConfig,
    pub eta_max: f64,
    /// Epochs since the last restart.
    pub epoch: usize,
}

impl SchedulerState {
    pub fn new(config: SchedulerConfig, eta_max: f64) -> Result<Self> {
        config.validate(eta_max)?;
        Ok(Self {
            config,
            eta_max,
            epoch: 0,
        })
    }

    /// Position inside the half period, in `[0, T_max]`. Past `T_max` the
    /// cosine runs back up, as the closed form does.
    pub fn counter(&self) -> usize {
        let period = 2 * self.config.t_max;
        let e = self.epoch % period;
        if e > self.config.t_max {
            period - e
        } else {
            e
        }
    }

    pub fn lr(&self) -> f64 {
        if self.config.constant {
            return self.eta_max;
        }
        let t = self.counter() as f64 / self.config.t_max as f64;
        let SchedulerConfig { eta_min, .. } = self.config;
        eta_min + (self.eta_max - eta_min) * (1.0 + (PI * t).cos()) / 2.0
    }

    /// Advances by one epoch given the loss history (latest last) and
    /// returns the new learning rate and whether the schedule restarted.
    pub fn step(&mut self, losses: &[f64]) -> (f64, bool) {
        let restart = self.config.restart && plateau(losses, &self.config);
        if restart {
            self.epoch = 0;
        } else {
            self.epoch += 1;
        }
        (self.lr(), restart)
    }
}

/// True when more than `window` losses are logged, the latest exceeds the
/// threshold, and each of the last `window` successive differences is below
/// `min_change`.
pub fn plateau(losses: &[f64], cfg: &SchedulerConfig) -> bool {
    let w = cfg.plateau_window;
    let Some(&last) = losses.last() else { return false };
    if losses.len() <= w || !(last > cfg.plateau_threshold) {
        return false;
    }
    losses[losses.len() - w - 1..]
        .windows(2)
        .all(|p| (p[1] - p[0]).abs() < cfg.min_change)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> SchedulerState {
        SchedulerState::new(SchedulerConfig::default(), 5.0).unwrap()
    }

    #[test]
    fn endpoints() {
        let mut s = state();
        assert_eq!(s.lr(), 5.0);
        for _ in 0..50 {
            s.step(&[]);
        }
        assert!(s.lr().abs() < 1e-15);
        assert_eq!(s.counter(), 50);
        s.step(&[]);
        assert_eq!(s.counter(), 49);
        for _ in 0..49 {
            s.step(&[]);
        }
        assert_eq!(s.counter(), 0);
        assert_eq!(s.lr(), 5.0);
    }

    #[test]
    fn midpoint() {
        let mut s = state();
        for _ in 0..25 {
            s.step(&[]);
        }
        assert!((s.lr() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn plateau_window_restarts() {
        let losses = [0.5, 0.501, 0.499, 0.502, 0.498, 0.5, 0.501];
        let mut s = state();
        for _ in 0..10 {
            s.step(&[]);
        }
        let (lr, restarted) = s.step(&losses);
        assert!(restarted);
        assert_eq!(lr, 5.0);
        assert_eq!(s.epoch, 0);
    }

    #[test]
    fn no_restart_cases() {
        let cfg = SchedulerConfig::default();
        // too short
        assert!(!plateau(&[0.5, 0.5, 0.5, 0.5, 0.5, 0.5], &cfg));
        // below threshold
        assert!(!plateau(&[0.05; 7], &cfg));
        // one big jump inside the window
        assert!(!plateau(&[0.5, 0.52, 0.52, 0.52, 0.52, 0.52, 0.52], &cfg));
        // jump just outside the window is ignored
        assert!(plateau(&[0.9, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], &cfg));
        let off = SchedulerConfig {
            restart: false,
            ..cfg
        };
        let mut s = SchedulerState::new(off, 1.0).unwrap();
        assert!(!s.step(&[0.5; 7]).1);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SchedulerConfig {
            eta_min: 6.0,
            ..Default::default()
        };
        assert!(SchedulerState::new(cfg, 5.0).is_err());
        let cfg = SchedulerConfig {
            t_max: 0,
            ..Default::default()
        };
        assert!(SchedulerState::new(cfg, 5.0).is_err());
    }
}
