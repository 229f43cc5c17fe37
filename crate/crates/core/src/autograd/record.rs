// SPDX-License-Identifier: Apache-2.0

//! Records sequence sampling and register interactions on a tape.

use super::tape::{BackwardOp, LinearMap, ParamVars, Tape, Var};
use crate::domain::params::{ParamKind, ParameterSet};
use crate::domain::pulse::{normalize_phase, Scalar};
use crate::domain::register::Register;
use crate::domain::sequence::Sequence;
use crate::error::{Error, Result};
use crate::waveforms::{
    blackman_window, envelope, envelope_vjp, grid_len, ramp_weights, EdgeProfile, InterpolationMatrix,
    WaveformKind, WaveformSpec,
};

/// How a sequence with trainable durations is laid onto the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SamplingPlan {
    /// Frozen auxiliary grid length; `None` uses `ceil(1000 · Σ d)`.
    pub grid_len: Option<usize>,
    pub profile: EdgeProfile,
}

/// Tape variables of a sampled drive and the pair interactions.
#[derive(Debug, Clone, Copy)]
pub struct RecordedDrive {
    pub amp: Var,
    pub det: Var,
    pub phase: Var,
    /// `U_ij` for `i < j` in row order.
    pub pairs: Var,
}

fn scalar_var(tape: &mut Tape, vars: &ParamVars, s: &Scalar) -> Result<Var> {
    match s {
        Scalar::Value(x) => Ok(tape.scalar(*x)),
        Scalar::Var(name) => {
            let v = vars.get(name)?;
            if tape.len(v) != 1 {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: 1,
                    got: tape.len(v),
                });
            }
            Ok(v)
        }
    }
}

struct DenseColumns {
    /// Column-major `n × cols`.
    cols: Vec<Vec<f64>>,
}

impl LinearMap for DenseColumns {
    fn input_len(&self) -> usize {
        self.cols.len()
    }

    fn output_len(&self) -> usize {
        self.cols[0].len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len()];
        for (col, xi) in self.cols.iter().zip(x) {
            out.iter_mut().zip(col).for_each(|(o, c)| *o += c * xi);
        }
        out
    }

    fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().zip(g).map(|(c, gi)| c * gi).sum())
            .collect()
    }
}

impl LinearMap for InterpolationMatrix {
    fn input_len(&self) -> usize {
        self.n_controls()
    }

    fn output_len(&self) -> usize {
        self.duration()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        InterpolationMatrix::apply(self, x).expect("input length checked by the tape")
    }

    fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        InterpolationMatrix::apply_transpose(self, g)
    }
}

/// Records one waveform's samples.
pub fn record_waveform(tape: &mut Tape, vars: &ParamVars, spec: &WaveformSpec) -> Result<Var> {
    let n = spec.duration_ns;
    match &spec.kind {
        WaveformKind::Constant { value } => {
            let v = scalar_var(tape, vars, value)?;
            tape.broadcast(v, n)
        }
        WaveformKind::Ramp { start, stop } => {
            let a = scalar_var(tape, vars, start)?;
            let b = scalar_var(tape, vars, stop)?;
            let ab = tape.concat(&[a, b]);
            let w = ramp_weights(n);
            let map = DenseColumns {
                cols: vec![w.iter().map(|u| 1.0 - u).collect(), w],
            };
            tape.linear(ab, Box::new(map))
        }
        WaveformKind::Blackman { area } => {
            let a = scalar_var(tape, vars, area)?;
            if !(tape.value(a)[0] > 0.0) {
                return Err(Error::invalid("area", "blackman area must be positive"));
            }
            let map = DenseColumns {
                cols: vec![blackman_window(n)],
            };
            tape.linear(a, Box::new(map))
        }
        WaveformKind::Custom {
            controls,
            n_controls,
            transform,
            gamma,
        } => {
            let theta = vars.get(controls)?;
            if tape.len(theta) != *n_controls {
                return Err(Error::ShapeMismatch {
                    name: controls.clone(),
                    expected: *n_controls,
                    got: tape.len(theta),
                });
            }
            let (tr, g) = (*transform, *gamma);
            let squashed = tape.map(theta, |x| (tr.apply(&[x], g)[0], tr.derivative(&[x], g)[0]));
            let w = tape.linear(squashed, Box::new(InterpolationMatrix::new(*n_controls, n)?))?;
            // rounding-level clamp; the derivative is taken as 1
            Ok(tape.map(w, move |x| (tr.clip(x), 1.0)))
        }
    }
}

fn record_phase(tape: &mut Tape, vars: &ParamVars, phase: &Scalar) -> Result<Var> {
    let v = scalar_var(tape, vars, phase)?;
    Ok(tape.map(v, |x| (normalize_phase(x), 1.0)))
}

/// Records the sampled drive of `seq` and the pairwise interactions of its register.
pub fn record_drive(
    tape: &mut Tape,
    seq: &Sequence,
    params: &ParameterSet,
    vars: &ParamVars,
    plan: &SamplingPlan,
) -> Result<RecordedDrive> {
    seq.validate()?;
    let (amp, det, phase) = if seq.has_trainable_durations() {
        record_smooth(tape, seq, vars, plan)?
    } else {
        let mut amps = Vec::new();
        let mut dets = Vec::new();
        let mut phases = Vec::new();
        for p in seq.pulses() {
            amps.push(record_waveform(tape, vars, &p.amplitude)?);
            dets.push(record_waveform(tape, vars, &p.detuning)?);
            let f = record_phase(tape, vars, &p.phase)?;
            phases.push(tape.broadcast(f, p.duration_ns())?);
        }
        (tape.concat(&amps), tape.concat(&dets), tape.concat(&phases))
    };
    let pairs = record_pairs(tape, seq.register(), seq.device().c6, params, vars)?;
    Ok(RecordedDrive {
        amp,
        det,
        phase,
        pairs,
    })
}

fn record_smooth(tape: &mut Tape, seq: &Sequence, vars: &ParamVars, plan: &SamplingPlan) -> Result<(Var, Var, Var)> {
    let mut levels = (Vec::new(), Vec::new(), Vec::new());
    let mut durations = Vec::new();
    for p in seq.pulses() {
        let level = |tape: &mut Tape, spec: &WaveformSpec| match &spec.kind {
            WaveformKind::Constant { value } => scalar_var(tape, vars, value),
            _ => Err(Error::Unsupported("trainable durations require constant waveforms".into())),
        };
        levels.0.push(level(tape, &p.amplitude)?);
        levels.1.push(level(tape, &p.detuning)?);
        levels.2.push(record_phase(tape, vars, &p.phase)?);
        let d = match &p.duration_var {
            Some(name) => scalar_var(tape, vars, &Scalar::Var(name.clone()))?,
            None => tape.scalar(p.duration_ns() as f64 * 1e-3),
        };
        let dv = tape.value(d)[0];
        if !(dv > 0.0) {
            return Err(Error::invalid("duration", format!("{dv} µs must be positive")));
        }
        durations.push(d);
    }
    let durations = tape.concat(&durations);
    let len = plan.grid_len.unwrap_or_else(|| grid_len(tape.value(durations)));
    let kappa = seq.edge_steepness();
    let mut out = Vec::new();
    for lv in [levels.0, levels.1, levels.2] {
        let lv = tape.concat(&lv);
        out.push(record_envelope(tape, lv, durations, kappa, plan.profile, len));
    }
    Ok((out[0], out[1], out[2]))
}

/// Smooth envelope of piecewise levels with differentiable durations (µs).
pub fn record_envelope(tape: &mut Tape, levels: Var, durations: Var, kappa: f64, profile: EdgeProfile, len: usize) -> Var {
    let value = envelope(tape.value(levels), tape.value(durations), kappa, profile, len);
    tape.custom(&[levels, durations], value, Box::new(EnvelopeOp { kappa, profile }))
}

struct EnvelopeOp {
    kappa: f64,
    profile: EdgeProfile,
}

impl BackwardOp for EnvelopeOp {
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let (gl, gd) = envelope_vjp(x[0], x[1], self.kappa, self.profile, g);
        grads[0].iter_mut().zip(&gl).for_each(|(a, b)| *a += b);
        grads[1].iter_mut().zip(&gd).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

/// Records `U_ij = C₆/r_ij⁶` from atom positions; atoms with a coordinate
/// parameter of the same name read their position from it.
pub fn record_pairs(
    tape: &mut Tape,
    register: &Register,
    c6: f64,
    params: &ParameterSet,
    vars: &ParamVars,
) -> Result<Var> {
    let mut parts = Vec::new();
    for atom in register.atoms() {
        let from_param = params
            .get(&atom.name)
            .is_some_and(|p| p.kind == ParamKind::Coordinate);
        let v = if from_param {
            let v = vars.get(&atom.name)?;
            if tape.len(v) != 2 {
                return Err(Error::ShapeMismatch {
                    name: atom.name.clone(),
                    expected: 2,
                    got: tape.len(v),
                });
            }
            v
        } else {
            tape.constant(vec![atom.x, atom.y])
        };
        parts.push(v);
    }
    let positions = tape.concat(&parts);
    record_pair_interactions(tape, positions, c6)
}

/// `C₆/r⁶` for every pair of the flattened `(x, y)` list.
pub fn record_pair_interactions(tape: &mut Tape, positions: Var, c6: f64) -> Result<Var> {
    let pos = tape.value(positions);
    let n = pos.len() / 2;
    let mut value = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (pos[2 * i] - pos[2 * j]).hypot(pos[2 * i + 1] - pos[2 * j + 1]);
            if !(r > 0.0) {
                return Err(Error::Register(format!("atoms {i} and {j} coincide")));
            }
            value.push(c6 / r.powi(6));
        }
    }
    Ok(tape.custom(&[positions], value, Box::new(PairOp { c6 })))
}

struct PairOp {
    c6: f64,
}

impl BackwardOp for PairOp {
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let pos = x[0];
        let n = pos.len() / 2;
        let mut p = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pos[2 * i] - pos[2 * j], pos[2 * i + 1] - pos[2 * j + 1]);
                let r2 = dx * dx + dy * dy;
                // dU/dx_i = −6 C₆ r⁻⁸ (x_i − x_j)
                let f = -6.0 * self.c6 / r2.powi(4) * g[p];
                grads[0][2 * i] += f * dx;
                grads[0][2 * i + 1] += f * dy;
                grads[0][2 * j] -= f * dx;
                grads[0][2 * j + 1] -= f * dy;
                p += 1;
            }
        }
        Ok(())
    }
}
