// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration documents.
//!
//! Every physical quantity carries its unit in the key name. Optional keys
//! fall back to defaults that depend on the experiment kind; [`ExperimentConfig::resolved`]
//! fills them in so that a stored config is self-describing.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::device::C6_RB_N60;
use crate::domain::register::Layout;
use crate::dynamics::{parse_bitstring, SolverOptions};
use crate::error::{Error, Result};
use crate::optimize::{AdamConfig, RunConfig, SchedulerConfig, DEFAULT_LOSS_BREAK};

/// Largest register the experiment runners accept.
pub const MAX_EXPERIMENT_QUBITS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Piecewise-constant pulses towards a global Hadamard.
    GateConst,
    /// One sine-interpolated pulse towards a global Hadamard.
    GateCustom,
    /// One sine-interpolated pulse between two basis states.
    StatePrep,
    /// Constant plus Blackman pulse fitting the Rydberg number to a target.
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutName {
    #[default]
    Linear,
    Rectangular,
    Triangular,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub loss_break: Option<f64>,
    pub t_max: Option<usize>,
    pub eta_min: Option<f64>,
    pub restart: Option<bool>,
    pub constant_lr: Option<bool>,
    pub min_change: Option<f64>,
    pub plateau_window: Option<usize>,
    pub plateau_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_qubits: usize,
    #[serde(default)]
    pub layout: LayoutName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pulses: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_duration_ns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_controls: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_amp_rad_per_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_detuning_rad_per_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6_rad_um6_per_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Starting value of every constant-pulse parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_value: Option<f64>,
    /// Controls start uniformly in `[−r, r]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_state: Option<String>,
    /// Target of the expectation experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_value: Option<f64>,
    /// Parameters held fixed during optimization; `*` freezes all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    /// Config with every optional key at its default.
    pub fn new(kind: ExperimentKind, n_qubits: usize) -> Self {
        Self {
            kind,
            n_qubits,
            layout: LayoutName::Linear,
            rows: None,
            cols: None,
            spacing_um: None,
            n_pulses: None,
            pulse_duration_ns: None,
            duration_ns: None,
            n_controls: None,
            max_amp_rad_per_us: None,
            max_abs_detuning_rad_per_us: None,
            c6_rad_um6_per_us: None,
            gamma: None,
            init_value: None,
            control_range: None,
            initial_state: None,
            target_state: None,
            target_value: None,
            frozen: Vec::new(),
            seed: 0,
            optimizer: OptimizerSection::default(),
            solver: SolverOptions::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn spacing_um(&self) -> f64 {
        self.spacing_um.unwrap_or(match self.kind {
            ExperimentKind::StatePrep => 7.0,
            ExperimentKind::Expectation => 8.0,
            _ => 6.5,
        })
    }

    pub fn n_pulses(&self) -> usize {
        self.n_pulses.unwrap_or(8)
    }

    pub fn pulse_duration_ns(&self) -> usize {
        self.pulse_duration_ns.unwrap_or(131)
    }

    /// Total duration τ in ns.
    pub fn duration_ns(&self) -> usize {
        match self.kind {
            ExperimentKind::GateConst => self.n_pulses() * self.pulse_duration_ns(),
            ExperimentKind::Expectation => 1800,
            _ => self.duration_ns.unwrap_or(1100),
        }
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls.unwrap_or(match self.kind {
            ExperimentKind::StatePrep => 30,
            _ => 20,
        })
    }

    pub fn max_amp(&self) -> f64 {
        self.max_amp_rad_per_us.unwrap_or(4.0 * PI)
    }

    pub fn max_abs_detuning(&self) -> f64 {
        self.max_abs_detuning_rad_per_us.unwrap_or(match self.kind {
            ExperimentKind::StatePrep => 2.0 * PI,
            _ => 4.0 * PI,
        })
    }

    pub fn c6(&self) -> f64 {
        self.c6_rad_um6_per_us.unwrap_or(C6_RB_N60)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.05)
    }

    pub fn init_value(&self) -> f64 {
        self.init_value.unwrap_or(5.0)
    }

    pub fn control_range(&self) -> f64 {
        self.control_range.unwrap_or(2.5)
    }

    pub fn initial_state(&self) -> String {
        self.initial_state.clone().unwrap_or_else(|| "0".repeat(self.n_qubits))
    }

    pub fn target_state(&self) -> String {
        self.target_state.clone().unwrap_or_else(|| "1".repeat(self.n_qubits))
    }

    pub fn target_value(&self) -> f64 {
        self.target_value.unwrap_or(1e-6)
    }

    pub fn layout(&self) -> Result<Layout> {
        Ok(match self.layout {
            LayoutName::Linear => Layout::Linear,
            LayoutName::Triangular => Layout::Triangular,
            LayoutName::Rectangular => {
                let (rows, cols) = match (self.rows, self.cols) {
                    (Some(r), Some(c)) => (r, c),
                    (Some(r), None) if r > 0 && self.n_qubits % r == 0 => (r, self.n_qubits / r),
                    (None, Some(c)) if c > 0 && self.n_qubits % c == 0 => (self.n_qubits / c, c),
                    _ => return Err(Error::invalid("rows", "rectangular layouts need rows and cols")),
                };
                Layout::Rectangular { rows, cols }
            }
        })
    }

    pub fn run_config(&self) -> RunConfig {
        let o = &self.optimizer;
        let default_lr = match self.kind {
            ExperimentKind::Expectation => 0.05,
            _ => 5.0,
        };
        let sched = SchedulerConfig::default();
        RunConfig {
            epochs: o.epochs.unwrap_or(match self.kind {
                ExperimentKind::Expectation => 200,
                _ => 1000,
            }),
            loss_break: o.loss_break.unwrap_or(DEFAULT_LOSS_BREAK),
            adam: AdamConfig::with_lr(o.lr.unwrap_or(default_lr)),
            scheduler: SchedulerConfig {
                t_max: o.t_max.unwrap_or(sched.t_max),
                eta_min: o.eta_min.unwrap_or(sched.eta_min),
                plateau_window: o.plateau_window.unwrap_or(sched.plateau_window),
                min_change: o.min_change.unwrap_or(sched.min_change),
                plateau_threshold: o.plateau_threshold.unwrap_or(sched.plateau_threshold),
                restart: o.restart.unwrap_or(self.kind != ExperimentKind::Expectation),
                constant: o.constant_lr.unwrap_or(self.kind == ExperimentKind::Expectation),
            },
        }
    }

    /// Copy with every default written out.
    pub fn resolved(&self) -> Self {
        let run = self.run_config();
        let custom = matches!(self.kind, ExperimentKind::GateCustom | ExperimentKind::StatePrep);
        let (rows, cols) = match self.layout() {
            Ok(Layout::Rectangular { rows, cols }) => (Some(rows), Some(cols)),
            _ => (self.rows, self.cols),
        };
        Self {
            kind: self.kind,
            n_qubits: self.n_qubits,
            layout: self.layout,
            rows,
            cols,
            spacing_um: Some(self.spacing_um()),
            n_pulses: (self.kind == ExperimentKind::GateConst).then(|| self.n_pulses()),
            pulse_duration_ns: (self.kind == ExperimentKind::GateConst).then(|| self.pulse_duration_ns()),
            duration_ns: Some(self.duration_ns()),
            n_controls: custom.then(|| self.n_controls()),
            max_amp_rad_per_us: Some(self.max_amp()),
            max_abs_detuning_rad_per_us: Some(self.max_abs_detuning()),
            c6_rad_um6_per_us: Some(self.c6()),
            gamma: custom.then(|| self.gamma()),
            init_value: (self.kind == ExperimentKind::GateConst).then(|| self.init_value()),
            control_range: custom.then(|| self.control_range()),
            initial_state: (self.kind == ExperimentKind::StatePrep).then(|| self.initial_state()),
            target_state: (self.kind == ExperimentKind::StatePrep).then(|| self.target_state()),
            target_value: (self.kind == ExperimentKind::Expectation).then(|| self.target_value()),
            frozen: self.frozen.clone(),
            seed: self.seed,
            optimizer: OptimizerSection {
                epochs: Some(run.epochs),
                lr: Some(run.adam.lr),
                loss_break: Some(run.loss_break),
                t_max: Some(run.scheduler.t_max),
                eta_min: Some(run.scheduler.eta_min),
                restart: Some(run.scheduler.restart),
                constant_lr: Some(run.scheduler.constant),
                min_change: Some(run.scheduler.min_change),
                plateau_window: Some(run.scheduler.plateau_window),
                plateau_threshold: Some(run.scheduler.plateau_threshold),
            },
            solver: self.solver.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(&self.resolved())?;
        Ok(hex::encode(Sha256::digest(json)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_EXPERIMENT_QUBITS {
            return Err(Error::invalid(
                "n_qubits",
                format!("must lie in 1..={MAX_EXPERIMENT_QUBITS}"),
            ));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be positive")))
            }
        };
        positive("spacing_um", self.spacing_um())?;
        positive("max_amp_rad_per_us", self.max_amp())?;
        positive("max_abs_detuning_rad_per_us", self.max_abs_detuning())?;
        positive("c6_rad_um6_per_us", self.c6())?;
        if let Layout::Rectangular { rows, cols } = self.layout()? {
            if rows * cols != self.n_qubits {
                return Err(Error::invalid(
                    "rows",
                    format!("{rows}x{cols} does not hold {} atoms", self.n_qubits),
                ));
            }
        }
        match self.kind {
            ExperimentKind::GateConst => {
                if self.n_pulses() == 0 {
                    return Err(Error::invalid("n_pulses", "must be at least 1"));
                }
                if self.pulse_duration_ns() == 0 {
                    return Err(Error::invalid("pulse_duration_ns", "must be at least 1"));
                }
                if !self.init_value().is_finite() {
                    return Err(Error::invalid("init_value", "must be finite"));
                }
            }
            ExperimentKind::GateCustom | ExperimentKind::StatePrep => {
                let m = self.n_controls();
                if m == 0 {
                    return Err(Error::invalid("n_controls", "must be at least 1"));
                }
                if self.duration_ns() < m + 1 {
                    return Err(Error::invalid(
                        "duration_ns",
                        format!("{} ns leaves a control spacing below 1 ns for {m} controls", self.duration_ns()),
                    ));
                }
                positive("gamma", self.gamma())?;
                if !(self.control_range() >= 0.0) {
                    return Err(Error::invalid("control_range", "must be non-negative"));
                }
            }
            ExperimentKind::Expectation => {
                if !self.target_value().is_finite() {
                    return Err(Error::invalid("target_value", "must be finite"));
                }
            }
        }
        if self.kind == ExperimentKind::StatePrep {
            for (name, bits) in [("initial_state", self.initial_state()), ("target_state", self.target_state())] {
                if bits.len() != self.n_qubits {
                    return Err(Error::invalid(
                        name,
                        format!("`{bits}` has {} bits for {} qubits", bits.len(), self.n_qubits),
                    ));
                }
                parse_bitstring(&bits).map_err(|_| Error::invalid(name, format!("`{bits}` is not a bitstring")))?;
            }
        }
        let run = self.run_config();
        run.adam.validate()?;
        run.scheduler.validate(run.adam.lr)?;
        if !(run.loss_break >= 0.0) {
            return Err(Error::invalid("loss_break", "must be non-negative"));
        }
        self.solver.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_document() {
        let cfg = ExperimentConfig::from_toml_str("kind = \"state_prep\"\nn_qubits = 2\n").unwrap();
        assert_eq!(cfg.spacing_um(), 7.0);
        assert_eq!(cfg.n_controls(), 30);
        assert_eq!(cfg.max_abs_detuning(), 2.0 * PI);
        assert_eq!(cfg.target_state(), "11");
        assert_eq!(cfg.run_config().adam.lr, 5.0);
        assert_eq!(cfg.run_config().scheduler.t_max, 50);
    }

    #[test]
    fn gate_const_duration() {
        let cfg = ExperimentConfig::new(ExperimentKind::GateConst, 2);
        assert_eq!(cfg.duration_ns(), 1048);
    }

    #[test]
    fn negative_spacing_is_named() {
        let err = ExperimentConfig::from_toml_str("kind = \"gate_const\"\nn_qubits = 2\nspacing_um = -1.0\n")
            .unwrap_err();
        assert!(err.to_string().contains("spacing"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("kind = \"gate_const\"\nn_qubits = 2\nspacing = 6.5\n").is_err());
    }

    #[test]
    fn bad_bitstrings() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::StatePrep, 3);
        cfg.target_state = Some("11".into());
        assert!(cfg.validate().is_err());
        cfg.target_state = Some("1x1".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_stable_across_reserialization() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GateCustom, 3);
        cfg.seed = 7;
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
        let resolved = ExperimentConfig::from_toml_str(&cfg.resolved().to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg.hash().unwrap(), resolved.hash().unwrap());
        cfg.seed = 8;
        assert_ne!(cfg.hash().unwrap(), back.hash().unwrap());
    }

    #[test]
    fn rectangular_layout_needs_matching_shape() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::StatePrep, 6);
        cfg.layout = LayoutName::Rectangular;
        assert!(cfg.validate().is_err());
        cfg.rows = Some(2);
        assert_eq!(cfg.layout().unwrap(), Layout::Rectangular { rows: 2, cols: 3 });
        cfg.cols = Some(4);
        assert!(cfg.validate().is_err());
    }
}
