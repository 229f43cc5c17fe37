// SPDX-License-Identifier: Apache-2.0

//! A sequence bound to parameter values, an initial state and an objective.

use ndarray::Array2;
use num_complex::Complex64;

use crate::autograd::{
    expectation_value, mse, record_drive, record_propagation, state_infidelity, unitary_infidelity,
    DifferentiableLoss, GradientMap, ParamVars, SamplingPlan, Tape, Var,
};
use crate::domain::params::{ParamKind, ParameterSet};
use crate::domain::pulse::Pulse;
use crate::domain::sequence::Sequence;
use crate::dynamics::integrator::StepSchedule;
use crate::dynamics::{hermitian_residual, SolverOptions, StateBatch};
use crate::error::{Error, Result};
use crate::waveforms::{sample_sequence, sample_smooth, DiscretizedDrive, EdgeProfile};

/// What the loss measures on the final state(s).
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `(⟨ψ|C|ψ⟩ − target)²` for a single initial state.
    Expectation { observable: Array2<Complex64>, target: f64 },
    /// `1 − |Tr(U† T)| / 2ᴺ`; the initial batch must be the identity.
    UnitaryInfidelity { target: Array2<Complex64> },
    /// `1 − |⟨t|ψ⟩|²` for a single initial state.
    StateInfidelity { target: Vec<Complex64> },
}

impl Objective {
    /// Fidelity implied by a loss value, for infidelity objectives.
    pub fn fidelity(&self, loss: f64) -> Option<f64> {
        match self {
            Objective::Expectation { .. } => None,
            _ => Some(1.0 - loss),
        }
    }
}

/// Step schedule and envelope grid length frozen from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen {
    pub schedule: StepSchedule,
    pub grid_len: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub grads: GradientMap,
    pub frozen: Frozen,
}

#[derive(Debug, Clone)]
pub struct QuantumModel {
    seq: Sequence,
    params: ParameterSet,
    initial: StateBatch,
    objective: Objective,
    solver: SolverOptions,
    profile: EdgeProfile,
}

impl QuantumModel {
    pub fn new(
        seq: Sequence,
        params: ParameterSet,
        initial: StateBatch,
        objective: Objective,
        solver: SolverOptions,
    ) -> Result<Self> {
        seq.validate()?;
        solver.validate()?;
        for (name, shape) in seq.declared_variables() {
            let value = params.value(name)?;
            if value.len() != shape.len() {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.len(),
                    got: value.len(),
                });
            }
        }
        for (name, p) in params.iter() {
            if p.kind == ParamKind::Coordinate && seq.register().atom(name).is_none() {
                return Err(Error::UnboundParameter(name.to_string()));
            }
        }
        let dim = 1usize << seq.n_qubits();
        if initial.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "initial state of dimension {} for {} qubits",
                initial.dim(),
                seq.n_qubits()
            )));
        }
        match &objective {
            Objective::Expectation { observable, .. } => {
                if observable.dim() != (dim, dim) {
                    return Err(Error::DimensionMismatch(format!("observable {:?}", observable.dim())));
                }
                let r = hermitian_residual(observable);
                if r > 1e-12 {
                    return Err(Error::NotHermitian(r));
                }
            }
            Objective::UnitaryInfidelity { target } => {
                if target.dim() != (dim, dim) || initial.cols() != dim {
                    return Err(Error::DimensionMismatch(
                        "unitary objectives need a full basis batch and a square target".into(),
                    ));
                }
            }
            Objective::StateInfidelity { target } => {
                if target.len() != dim {
                    return Err(Error::DimensionMismatch(format!("target state of length {}", target.len())));
                }
            }
        }
        if !matches!(objective, Objective::UnitaryInfidelity { .. }) && initial.cols() != 1 {
            return Err(Error::DimensionMismatch("objective needs a single initial state".into()));
        }
        let mut model = Self {
            seq,
            params: params.clone(),
            initial,
            objective,
            solver,
            profile: EdgeProfile::default(),
        };
        model.update_sequence(&params)?;
        Ok(model)
    }

    pub fn with_profile(mut self, profile: EdgeProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn sequence(&self) -> &Sequence {
        &self.seq
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn initial(&self) -> &StateBatch {
        &self.initial
    }

    pub fn solver(&self) -> &SolverOptions {
        &self.solver
    }

    /// Rebuilds the sequence from new parameter values: stores them and moves
    /// atoms that have coordinate parameters.
    pub fn update_sequence(&mut self, params: &ParameterSet) -> Result<()> {
        let mut positions = self.seq.register().positions();
        let mut moved = false;
        for (atom, pos) in self.seq.register().atoms().iter().zip(positions.iter_mut()) {
            if let Some(p) = params.get(&atom.name) {
                if p.kind == ParamKind::Coordinate {
                    let v = p.value.as_slice();
                    if v.len() != 2 {
                        return Err(Error::ShapeMismatch {
                            name: atom.name.clone(),
                            expected: 2,
                            got: v.len(),
                        });
                    }
                    *pos = [v[0], v[1]];
                    moved = true;
                }
            }
        }
        if moved {
            let register = self.seq.register().with_positions(&positions)?;
            self.seq = self.seq.with_register(register)?;
        }
        self.params = params.clone();
        Ok(())
    }

    /// Records the loss for `params` on `tape`.
    pub fn record(
        &self,
        tape: &mut Tape,
        vars: &ParamVars,
        params: &ParameterSet,
        frozen: Option<&Frozen>,
    ) -> Result<(Var, Frozen)> {
        let plan = SamplingPlan {
            grid_len: frozen.map(|f| f.grid_len),
            profile: self.profile,
        };
        let drive = record_drive(tape, &self.seq, params, vars, &plan)?;
        let node = record_propagation(
            tape,
            self.seq.n_qubits(),
            drive.amp,
            drive.det,
            drive.phase,
            drive.pairs,
            &self.initial,
            &self.solver,
            frozen.map(|f| &f.schedule),
        )?;
        let loss = match &self.objective {
            Objective::Expectation { observable, target } => {
                let e = expectation_value(tape, node.state, observable)?;
                mse(tape, e, *target)?
            }
            Objective::UnitaryInfidelity { target } => unitary_infidelity(tape, node.state, target)?,
            Objective::StateInfidelity { target } => state_infidelity(tape, node.state, target)?,
        };
        let frozen = Frozen {
            schedule: node.schedule,
            grid_len: tape.len(drive.amp),
        };
        Ok((loss, frozen))
    }

    /// Loss only.
    pub fn loss(&self, params: &ParameterSet, frozen: Option<&Frozen>) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, params)?;
        let (loss, _) = self.record(&mut tape, &vars, params, frozen)?;
        Ok(tape.value(loss)[0])
    }

    /// Loss and gradient with respect to every trainable parameter.
    pub fn evaluate(&self, params: &ParameterSet, frozen: Option<&Frozen>) -> Result<Evaluation> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, params)?;
        let (loss, frozen) = self.record(&mut tape, &vars, params, frozen)?;
        let value = tape.value(loss)[0];
        if !value.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let grads = tape.backward(loss)?;
        Ok(Evaluation {
            loss: value,
            grads,
            frozen,
        })
    }

    /// Current loss at the stored parameters.
    pub fn forward(&self) -> Result<f64> {
        self.loss(&self.params, None)
    }

    /// The drive at the stored parameters on the 1 ns grid.
    pub fn drive(&self) -> Result<DiscretizedDrive> {
        sample_sequence(&self.seq, &self.params)
    }

    /// A loss whose step schedule and grid are frozen at `at`, for finite
    /// differences.
    pub fn frozen_loss(&self, at: &ParameterSet) -> Result<FrozenLoss<'_>> {
        let frozen = self.evaluate(at, None)?.frozen;
        Ok(FrozenLoss { model: self, frozen })
    }
}

pub struct FrozenLoss<'a> {
    model: &'a QuantumModel,
    frozen: Frozen,
}

impl DifferentiableLoss for FrozenLoss<'_> {
    fn loss(&self, params: &ParameterSet) -> Result<f64> {
        self.model.loss(params, Some(&self.frozen))
    }

    fn loss_and_grad(&self, params: &ParameterSet) -> Result<(f64, GradientMap)> {
        let e = self.model.evaluate(params, Some(&self.frozen))?;
        Ok((e.loss, e.grads))
    }
}

/// Replaces a sequence of constant pulses by 1 ns constant pulses following
/// the smooth envelope for the given durations (µs).
pub fn reparameterize_duration(
    seq: &Sequence,
    params: &ParameterSet,
    durations_us: &[f64],
    edge_steepness: f64,
) -> Result<Sequence> {
    if durations_us.len() != seq.pulses().len() {
        return Err(Error::ShapeMismatch {
            name: "durations".into(),
            expected: seq.pulses().len(),
            got: durations_us.len(),
        });
    }
    if let Some(d) = durations_us.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::invalid("durations", format!("{d} µs must be positive")));
    }
    if !seq.pulses().iter().all(Pulse::is_constant) {
        return Err(Error::Unsupported("duration reparameterization needs constant pulses".into()));
    }
    let mut smooth = seq.clone();
    smooth.set_edge_steepness(edge_steepness)?;
    let len = crate::waveforms::grid_len(durations_us);
    let drive = sample_smooth(&smooth, params, durations_us, len, EdgeProfile::default())?;
    let mut out = Sequence::new(seq.register().clone(), seq.device().clone())?;
    for k in 0..len {
        out.add(Pulse::constant(1, drive.amp[k], drive.det[k], drive.phase[k])?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::params::Parameter;
    use crate::domain::register::Register;
    use crate::domain::sequence::VarShape;
    use crate::domain::DeviceSpec;
    use crate::dynamics::rydberg_number;

    fn single_atom_model(omega: f64) -> QuantumModel {
        let reg = Register::from_coords([("q0", (0.0, 0.0))]).unwrap();
        let mut seq = Sequence::new(reg, DeviceSpec::default()).unwrap();
        let w = seq.declare_variable("omega", VarShape::Scalar).unwrap();
        seq.add(Pulse::constant(500, w, 0.0, 0.0).unwrap()).unwrap();
        let params = ParameterSet::new()
            .with("omega", Parameter::new(omega, ParamKind::Drive))
            .unwrap();
        QuantumModel::new(
            seq,
            params,
            StateBatch::basis(1, 0).unwrap(),
            Objective::Expectation {
                observable: rydberg_number(1),
                target: 1.0,
            },
            SolverOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn expectation_loss_of_pi_pulse_vanishes() {
        // Ωτ = π with τ = 0.5 µs
        let m = single_atom_model(2.0 * std::f64::consts::PI);
        assert!(m.forward().unwrap() < 1e-14);
        let e = m.evaluate(m.params(), None).unwrap();
        assert!(e.grads["omega"][0].abs() < 1e-6);
    }

    #[test]
    fn rejects_unbound_and_mismatched_inputs() {
        let m = single_atom_model(1.0);
        let err = QuantumModel::new(
            m.sequence().clone(),
            ParameterSet::new(),
            StateBatch::basis(1, 0).unwrap(),
            m.objective().clone(),
            SolverOptions::default(),
        );
        assert!(matches!(err, Err(Error::UnboundParameter(_))));
        let err = QuantumModel::new(
            m.sequence().clone(),
            m.params().clone(),
            StateBatch::identity(2).unwrap(),
            m.objective().clone(),
            SolverOptions::default(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn coordinates_move_atoms_on_update() {
        let reg = Register::from_coords([("a", (0.0, 0.0)), ("b", (8.0, 0.0))]).unwrap();
        let mut seq = Sequence::new(reg, DeviceSpec::default()).unwrap();
        seq.add(Pulse::constant(100, 1.0, 0.0, 0.0).unwrap()).unwrap();
        let params = ParameterSet::new()
            .with("b", Parameter::new(vec![8.0, 0.0], ParamKind::Coordinate))
            .unwrap();
        let mut m = QuantumModel::new(
            seq,
            params.clone(),
            StateBatch::identity(4).unwrap(),
            Objective::UnitaryInfidelity {
                target: crate::dynamics::hadamard_target(2).unwrap(),
            },
            SolverOptions::default(),
        )
        .unwrap();
        let mut moved = params;
        moved.set_value("b", &[9.0, 1.0]).unwrap();
        m.update_sequence(&moved).unwrap();
        assert_eq!(m.sequence().register().atom("b").unwrap().position(), [9.0, 1.0]);
    }

    #[test]
    fn reparameterized_pulse_matches_piecewise_drive() {
        let reg = Register::from_coords([("q0", (0.0, 0.0))]).unwrap();
        let mut seq = Sequence::new(reg, DeviceSpec::default()).unwrap();
        seq.add(Pulse::constant(400, 3.0, -1.0, 0.0).unwrap()).unwrap();
        seq.add(Pulse::constant(200, 5.0, 2.0, 0.0).unwrap()).unwrap();
        let aux = reparameterize_duration(&seq, &ParameterSet::new(), &[0.4, 0.2], 1.0).unwrap();
        assert_eq!(aux.pulses().len(), 600);
        let drive = sample_sequence(&aux, &ParameterSet::new()).unwrap();
        assert!((drive.amp[200] - 3.0).abs() < 1e-3);
        assert!((drive.amp[500] - 5.0).abs() < 1e-3);
        assert!((drive.det[500] - 2.0).abs() < 1e-3);
        assert!(reparameterize_duration(&seq, &ParameterSet::new(), &[0.4, 0.0], 1.0).is_err());
    }
}
