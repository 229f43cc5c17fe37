// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::domain::device::DeviceSpec;
use crate::domain::params::{ParamKind, Parameter, ParameterSet};
use crate::domain::pulse::Pulse;
use crate::domain::register::Register;
use crate::domain::sequence::{Sequence, VarShape};
use crate::dynamics::{hadamard_target, parse_bitstring, rydberg_number, StateBatch};
use crate::error::{Error, Result};
use crate::optimize::{run_optimization, Objective, QuantumModel, RunConfig, RunOutcome};
use crate::waveforms::{phase_table, ControlTransform, DiscretizedDrive, PhaseEntry, WaveformSpec};

/// Names of the custom-waveform control vectors.
pub const AMP_CONTROLS: &str = "amp_controls";
pub const DET_CONTROLS: &str = "det_controls";

/// A ready-to-run optimization problem.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: QuantumModel,
    pub run: RunConfig,
}

fn device(cfg: &ExperimentConfig) -> DeviceSpec {
    DeviceSpec {
        max_amp: cfg.max_amp(),
        max_abs_detuning: cfg.max_abs_detuning(),
        c6: cfg.c6(),
        ..DeviceSpec::default()
    }
}

fn register(cfg: &ExperimentConfig) -> Result<Register> {
    Register::build(cfg.layout()?, cfg.spacing_um(), cfg.n_qubits)
}

pub fn amp_name(i: usize) -> String {
    format!("amp_{i}")
}

pub fn det_name(i: usize) -> String {
    format!("det_{i}")
}

pub fn phase_name(i: usize) -> String {
    format!("phase_{i}")
}

/// `K` constant pulses with trainable amplitude, detuning and phase each.
/// Amplitudes and detunings are clamped to the device limits; phases are free.
pub fn build_gate_const_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    expect_kind(cfg, ExperimentKind::GateConst)?;
    let dev = device(cfg);
    let mut seq = Sequence::new(register(cfg)?, dev.clone())?;
    let mut params = ParameterSet::new();
    let x0 = cfg.init_value();
    for i in 0..cfg.n_pulses() {
        let a = seq.declare_variable(amp_name(i), VarShape::Scalar)?;
        let d = seq.declare_variable(det_name(i), VarShape::Scalar)?;
        let f = seq.declare_variable(phase_name(i), VarShape::Scalar)?;
        seq.add(Pulse::constant(cfg.pulse_duration_ns(), a, d, f)?)?;
        params.insert(amp_name(i), Parameter::new(x0, ParamKind::Drive).constrained(0.0, dev.max_amp))?;
        params.insert(
            det_name(i),
            Parameter::new(x0, ParamKind::Drive).constrained(-dev.max_abs_detuning, dev.max_abs_detuning),
        )?;
        params.insert(phase_name(i), Parameter::new(x0, ParamKind::Phase))?;
    }
    let dim = 1 << cfg.n_qubits;
    let model = QuantumModel::new(
        seq,
        params,
        StateBatch::identity(dim)?,
        Objective::UnitaryInfidelity {
            target: hadamard_target(cfg.n_qubits)?,
        },
        cfg.solver.clone(),
    )?;
    Ok(Experiment {
        config: cfg.clone(),
        model,
        run: cfg.run_config(),
    })
}

/// One pulse of duration τ whose amplitude and detuning are sine
/// interpolations of `M` squashed controls each.
fn custom_sequence(cfg: &ExperimentConfig) -> Result<(Sequence, ParameterSet)> {
    let dev = device(cfg);
    let mut seq = Sequence::new(register(cfg)?, dev.clone())?;
    let m = cfg.n_controls();
    let tau = cfg.duration_ns();
    seq.declare_variable(AMP_CONTROLS, VarShape::Vector(m))?;
    seq.declare_variable(DET_CONTROLS, VarShape::Vector(m))?;
    let amp = WaveformSpec::custom(
        tau,
        AMP_CONTROLS,
        m,
        ControlTransform::AmplitudeSigmoid { max: dev.max_amp },
        cfg.gamma(),
    )?;
    let det = WaveformSpec::custom(
        tau,
        DET_CONTROLS,
        m,
        ControlTransform::DetuningTanh {
            max: dev.max_abs_detuning,
        },
        cfg.gamma(),
    )?;
    seq.add(Pulse::new(amp, det, 0.0)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.control_range();
    let mut draw = |n: usize| -> Vec<f64> {
        if r == 0.0 {
            return vec![0.0; n];
        }
        let u = Uniform::new(-r, r);
        (0..n).map(|_| u.sample(&mut rng)).collect()
    };
    let params = ParameterSet::new()
        .with(AMP_CONTROLS, Parameter::new(draw(m), ParamKind::Control))?
        .with(DET_CONTROLS, Parameter::new(draw(m), ParamKind::Control))?;
    Ok((seq, params))
}

pub fn build_gate_custom_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    expect_kind(cfg, ExperimentKind::GateCustom)?;
    let (seq, params) = custom_sequence(cfg)?;
    let model = QuantumModel::new(
        seq,
        params,
        StateBatch::identity(1 << cfg.n_qubits)?,
        Objective::UnitaryInfidelity {
            target: hadamard_target(cfg.n_qubits)?,
        },
        cfg.solver.clone(),
    )?;
    Ok(Experiment {
        config: cfg.clone(),
        model,
        run: cfg.run_config(),
    })
}

pub fn build_state_prep_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    expect_kind(cfg, ExperimentKind::StatePrep)?;
    cfg.validate()?;
    let (seq, params) = custom_sequence(cfg)?;
    let initial = StateBatch::from_bitstring(&cfg.initial_state())?;
    let mut target = vec![Complex64::new(0.0, 0.0); 1 << cfg.n_qubits];
    target[parse_bitstring(&cfg.target_state())?] = Complex64::new(1.0, 0.0);
    let model = QuantumModel::new(
        seq,
        params,
        initial,
        Objective::StateInfidelity { target },
        cfg.solver.clone(),
    )?;
    Ok(Experiment {
        config: cfg.clone(),
        model,
        run: cfg.run_config(),
    })
}

/// A constant pulse (trainable amplitude, clamped to [4.5, 5.5]) followed by
/// a Blackman pulse of trainable area over a 5 → 0 detuning ramp; the loss
/// is the squared distance of the total Rydberg number to a target value.
pub fn build_expectation_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    expect_kind(cfg, ExperimentKind::Expectation)?;
    let mut seq = Sequence::new(register(cfg)?, device(cfg))?;
    let omega = seq.declare_variable("omega", VarShape::Scalar)?;
    let area = seq.declare_variable("area", VarShape::Scalar)?;
    seq.add(Pulse::constant(1000, omega, 0.0, 0.0)?)?;
    seq.add(Pulse::new(
        WaveformSpec::blackman(800, area)?,
        WaveformSpec::ramp(800, 5.0, 0.0)?,
        0.0,
    )?)?;
    let params = ParameterSet::new()
        .with("omega", Parameter::new(5.0, ParamKind::Drive).constrained(4.5, 5.5))?
        .with("area", Parameter::new(std::f64::consts::PI, ParamKind::Drive))?;
    let model = QuantumModel::new(
        seq,
        params,
        StateBatch::basis(cfg.n_qubits, 0)?,
        Objective::Expectation {
            observable: rydberg_number(cfg.n_qubits),
            target: cfg.target_value(),
        },
        cfg.solver.clone(),
    )?;
    Ok(Experiment {
        config: cfg.clone(),
        model,
        run: cfg.run_config(),
    })
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!("expected a {kind:?} config, got {:?}", cfg.kind)));
    }
    cfg.validate()
}

pub fn build_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let mut e = match cfg.kind {
        ExperimentKind::GateConst => build_gate_const_experiment(cfg),
        ExperimentKind::GateCustom => build_gate_custom_experiment(cfg),
        ExperimentKind::StatePrep => build_state_prep_experiment(cfg),
        ExperimentKind::Expectation => build_expectation_experiment(cfg),
    }?;
    if !cfg.frozen.is_empty() {
        let mut params = e.model.params().clone();
        for name in &cfg.frozen {
            if name == "*" {
                params.iter_mut().for_each(|(_, p)| p.trainable = false);
            } else {
                params
                    .get_mut(name)
                    .ok_or_else(|| Error::invalid("frozen", format!("no parameter named `{name}`")))?
                    .trainable = false;
            }
        }
        e.model.update_sequence(&params)?;
    }
    Ok(e)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcome: RunOutcome,
    pub best_loss: f64,
    /// `None` for the expectation experiment.
    pub best_fidelity: Option<f64>,
    pub best_params: ParameterSet,
    pub best_drive: DiscretizedDrive,
    pub best_phases: Vec<PhaseEntry>,
}

impl Experiment {
    pub fn run(mut self) -> Result<ExperimentResult> {
        let outcome = run_optimization(&mut self.model, &self.run)?;
        self.finish(outcome)
    }

    /// Summarizes a finished (or resumed) run.
    pub fn finish(mut self, outcome: RunOutcome) -> Result<ExperimentResult> {
        let log = outcome.log();
        let best = log
            .best()
            .ok_or_else(|| Error::Config("run finished without any epoch".into()))?;
        let best_loss = best.loss;
        let best_params = log
            .best_params(self.model.params())?
            .expect("a best record exists");
        self.model.update_sequence(&best_params)?;
        Ok(ExperimentResult {
            best_fidelity: self.model.objective().fidelity(best_loss),
            best_drive: self.model.drive()?,
            best_phases: phase_table(self.model.sequence(), &best_params)?,
            config: self.config,
            best_loss,
            best_params,
            outcome,
        })
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    build_experiment(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SolverOptions;
    use crate::waveforms::sample_sequence;

    #[test]
    fn gate_const_shape() {
        let cfg = ExperimentConfig::new(ExperimentKind::GateConst, 2);
        let e = build_experiment(&cfg).unwrap();
        let p = e.model.params();
        assert_eq!(p.n_trainable_scalars(), 24);
        assert_eq!(p.iter().filter(|(_, q)| q.constraint.is_some()).count(), 16);
        assert_eq!(e.model.sequence().duration_ns(), 1048);
        assert_eq!(e.model.sequence().register().min_distance(), Some(6.5));
    }

    #[test]
    fn frozen_parameters() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GateConst, 1);
        cfg.frozen = vec!["phase_0".into(), "amp_3".into()];
        let e = build_experiment(&cfg).unwrap();
        assert_eq!(e.model.params().n_trainable_scalars(), 22);
        cfg.frozen = vec!["*".into()];
        assert_eq!(build_experiment(&cfg).unwrap().model.params().n_trainable_scalars(), 0);
        cfg.frozen = vec!["nope".into()];
        assert!(build_experiment(&cfg).is_err());
    }

    #[test]
    fn gate_const_zero_drive_single_pulse() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GateConst, 2);
        cfg.n_pulses = Some(1);
        cfg.init_value = Some(0.0);
        let e = build_experiment(&cfg).unwrap();
        // only |11⟩ picks up a phase θ, and |Tr (H⊗H)† U| / 4 = |sin(θ/2)| / 4
        let theta = cfg.c6() / 6.5f64.powi(6) * 131e-3;
        let l = e.model.forward().unwrap();
        assert!((l - (1.0 - (theta / 2.0).sin().abs() / 4.0)).abs() < 1e-9, "{l}");
    }

    #[test]
    fn phase_shift_by_two_pi_leaves_loss() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GateConst, 2);
        cfg.n_pulses = Some(2);
        cfg.pulse_duration_ns = Some(100);
        let e = build_experiment(&cfg).unwrap();
        let base = e.model.loss(e.model.params(), None).unwrap();
        let mut shifted = e.model.params().clone();
        for i in 0..2 {
            let f = shifted.scalar(&phase_name(i)).unwrap();
            shifted.set_value(&phase_name(i), &[f + 2.0 * std::f64::consts::PI]).unwrap();
        }
        let moved = e.model.loss(&shifted, None).unwrap();
        assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn custom_controls_are_seeded() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GateCustom, 2);
        let a = build_experiment(&cfg).unwrap();
        let b = build_experiment(&cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        cfg.seed = 1;
        let c = build_experiment(&cfg).unwrap();
        assert_ne!(a.model.params(), c.model.params());
        let v = a.model.params().value(AMP_CONTROLS).unwrap().as_slice().to_vec();
        assert_eq!(v.len(), 20);
        assert!(v.iter().all(|x| (-2.5..2.5).contains(x)));
    }

    #[test]
    fn zero_detuning_controls_give_zero_detuning() {
        let cfg = ExperimentConfig::new(ExperimentKind::GateCustom, 2);
        let e = build_experiment(&cfg).unwrap();
        let mut p = e.model.params().clone();
        p.set_value(DET_CONTROLS, &[0.0; 20]).unwrap();
        let drive = sample_sequence(e.model.sequence(), &p).unwrap();
        assert!(drive.det.iter().all(|d| *d == 0.0));
        assert!(drive.amp.iter().all(|a| (0.0..=4.0 * std::f64::consts::PI).contains(a)));
    }

    #[test]
    fn state_prep_identity_problem() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::StatePrep, 2);
        cfg.target_state = Some("00".into());
        let e = build_experiment(&cfg).unwrap();
        // controls far negative: amplitude σ(γθ) vanishes, detuning only adds phase
        let mut p = e.model.params().clone();
        p.set_value(AMP_CONTROLS, &[-1e4; 30]).unwrap();
        assert!(e.model.loss(&p, None).unwrap() < 1e-12);
    }

    #[test]
    fn expectation_smoke_run() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Expectation, 2);
        cfg.optimizer.epochs = Some(3);
        cfg.solver = SolverOptions::default();
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.outcome.log().len(), 3);
        assert!(r.best_fidelity.is_none());
        let w = r.best_params.scalar("omega").unwrap();
        assert!((4.5..=5.5).contains(&w));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let cfg = ExperimentConfig::new(ExperimentKind::StatePrep, 2);
        assert!(build_gate_const_experiment(&cfg).is_err());
    }
}
