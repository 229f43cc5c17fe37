// SPDX-License-Identifier: Apache-2.0

//! Differentiable time propagation.
//!
//! The forward pass runs the adaptive integrator (or replays a frozen step
//! schedule) and keeps the state at every checkpoint. The backward pass walks
//! the checkpoint segments in reverse: it re-integrates one segment storing
//! the Runge–Kutta stage inputs, then pulls the adjoint back through each
//! step with the same tableau and step sizes. This is the exact derivative of
//! the discrete solver output.

use ndarray::Array2;
use num_complex::Complex64;

use super::tape::{BackwardOp, Tape, Var};
use crate::dynamics::integrator::{tableau, Stepper, StepSchedule, NS_SCALE, RK4};
use crate::dynamics::{DriveCoefficients, IsingOperator, SolverKind, SolverOptions, StateBatch};
use crate::error::{Error, Result};

/// Byte budget for the stage inputs kept while reversing one segment.
const SEGMENT_BYTES: usize = 64 << 20;
const MAX_SEGMENT_NS: usize = 64;

/// Interaction matrix from the upper-triangle pair list `(0,1), (0,2), …, (1,2), …`.
pub fn pairs_to_matrix(n: usize, pairs: &[f64]) -> Result<Array2<f64>> {
    let expected = n * (n.saturating_sub(1)) / 2;
    if pairs.len() != expected {
        return Err(Error::ShapeMismatch {
            name: "interaction pairs".into(),
            expected,
            got: pairs.len(),
        });
    }
    let mut u = Array2::zeros((n, n));
    let mut p = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            u[[i, j]] = pairs[p];
            u[[j, i]] = pairs[p];
            p += 1;
        }
    }
    Ok(u)
}

pub(crate) fn pack(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub(crate) fn unpack(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Result of recording a propagation.
pub struct PropagationNode {
    /// Final states, packed `(re, im)`, column-major.
    pub state: Var,
    pub schedule: StepSchedule,
}

/// Records `ψ(τ)` as a function of the sampled drive and the pair interactions.
///
/// `amp`, `det`, `phase` have one entry per ns; `pairs` holds `U_ij` for
/// `i < j` in row order. With `schedule` given the steps are replayed,
/// otherwise they come from `opts`.
pub fn record_propagation(
    tape: &mut Tape,
    n_qubits: usize,
    amp: Var,
    det: Var,
    phase: Var,
    pairs: Var,
    initial: &StateBatch,
    opts: &SolverOptions,
    schedule: Option<&StepSchedule>,
) -> Result<PropagationNode> {
    let tau = tape.len(amp);
    if tape.len(det) != tau || tape.len(phase) != tau || tau == 0 {
        return Err(Error::DimensionMismatch(format!(
            "drive lengths amp {}, det {}, phase {}",
            tau,
            tape.len(det),
            tape.len(phase)
        )));
    }
    let dim = 1usize << n_qubits;
    if initial.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} for {n_qubits} qubits",
            initial.dim()
        )));
    }
    initial.check_normalized(crate::dynamics::integrator::INPUT_NORM_TOL)?;
    opts.validate()?;
    let interaction = pairs_to_matrix(n_qubits, tape.value(pairs))?;
    let op = IsingOperator::new(n_qubits, &interaction);
    let (a, d, f) = (tape.value(amp), tape.value(det), tape.value(phase));
    if a.iter().chain(d).chain(f).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("drive samples".into()));
    }
    let coeffs: Vec<DriveCoefficients> = (0..tau).map(|k| DriveCoefficients::new(a[k], d[k], f[k])).collect();

    let len = initial.data().len();
    let segment = segment_len(len);
    let mut stepper = Stepper::new(&op, len);
    let mut y = initial.data().to_vec();
    let mut checkpoints = Vec::with_capacity(tau / segment + 1);
    let schedule = match schedule {
        Some(s) => {
            if s.intervals() != tau {
                return Err(Error::ScheduleMismatch(format!(
                    "{} intervals recorded, drive lasts {tau} ns",
                    s.intervals()
                )));
            }
            let tab = tableau(s.kind());
            for (k, c) in coeffs.iter().enumerate() {
                if k % segment == 0 {
                    checkpoints.push(y.clone());
                }
                stepper.fixed_interval(tab, c, &mut y, s.interval(k));
            }
            s.clone()
        }
        None => match opts.kind {
            SolverKind::Rk4Fixed => {
                let s = StepSchedule::uniform(SolverKind::Rk4Fixed, tau, opts.rk4_substeps);
                for (k, c) in coeffs.iter().enumerate() {
                    if k % segment == 0 {
                        checkpoints.push(y.clone());
                    }
                    stepper.fixed_interval(&RK4, c, &mut y, s.interval(k));
                }
                s
            }
            SolverKind::Dp5Adaptive => {
                let mut h = 1.0;
                let mut all = Vec::with_capacity(tau);
                let mut accepted = Vec::new();
                for (k, c) in coeffs.iter().enumerate() {
                    if k % segment == 0 {
                        checkpoints.push(y.clone());
                    }
                    accepted.clear();
                    stepper.adaptive_interval(c, &mut y, &mut h, opts, &mut accepted, k)?;
                    all.push(accepted.clone());
                }
                StepSchedule::from_intervals(SolverKind::Dp5Adaptive, all)
            }
        },
    };
    drop(stepper);
    let op = PropagateOp {
        n_qubits,
        len,
        segment,
        coeffs,
        checkpoints,
        schedule: schedule.clone(),
    };
    let state = tape.custom(&[amp, det, phase, pairs], pack(&y), Box::new(op));
    Ok(PropagationNode { state, schedule })
}

fn segment_len(len: usize) -> usize {
    // stage inputs of up to a few steps per ns, 16 bytes per amplitude
    let per_ns = 6 * 2 * len * 16;
    (SEGMENT_BYTES / per_ns).clamp(1, MAX_SEGMENT_NS)
}

struct PropagateOp {
    n_qubits: usize,
    len: usize,
    segment: usize,
    coeffs: Vec<DriveCoefficients>,
    checkpoints: Vec<Vec<Complex64>>,
    schedule: StepSchedule,
}

/// Per-interval sensitivities `∂L/∂(gx, gy, gz)` and the pair total.
struct CoefficientGrads {
    gx: Vec<f64>,
    gy: Vec<f64>,
    gz: Vec<f64>,
    pairs: Vec<f64>,
}

impl PropagateOp {
    fn coefficient_grads(&self, pairs: &[f64], grad_out: &[f64]) -> Result<CoefficientGrads> {
        let tau = self.coeffs.len();
        let interaction = pairs_to_matrix(self.n_qubits, pairs)?;
        let op = IsingOperator::new(self.n_qubits, &interaction);
        let tab = tableau(self.schedule.kind());
        let mut stepper = Stepper::new(&op, self.len);
        let mut out = CoefficientGrads {
            gx: vec![0.0; tau],
            gy: vec![0.0; tau],
            gz: vec![0.0; tau],
            pairs: vec![0.0; pairs.len()],
        };
        let zero = Complex64::new(0.0, 0.0);
        let mut ybar = unpack(grad_out);
        let mut kbar = vec![vec![zero; self.len]; tab.stages];
        let mut stage_bar = vec![vec![zero; self.len]; tab.stages];
        let mut scratch = vec![zero; self.len];

        for (seg, start_state) in self.checkpoints.iter().enumerate().rev() {
            let k0 = seg * self.segment;
            let k1 = (k0 + self.segment).min(tau);
            // re-integrate the segment, keeping every step's stage inputs
            let mut records: Vec<(usize, f64, Vec<Vec<Complex64>>)> = Vec::new();
            let mut y = start_state.clone();
            for k in k0..k1 {
                for &h in self.schedule.interval(k) {
                    stepper.step(tab, &self.coeffs[k], &mut y, h);
                    records.push((k, h, stepper.ys[..tab.stages].to_vec()));
                }
            }
            for (k, h, ys) in records.iter().rev() {
                let c = &self.coeffs[*k];
                for i in (0..tab.stages).rev() {
                    // k̄_i = h b_i ȳ + h Σ_{l>i} a_li Ȳ_l
                    let kb = &mut kbar[i];
                    let w = h * tab.b[i];
                    for (dst, src) in kb.iter_mut().zip(&ybar) {
                        *dst = src * w;
                    }
                    for l in (i + 1)..tab.stages {
                        let a = h * tab.a[l][i];
                        if a != 0.0 {
                            for (dst, src) in kb.iter_mut().zip(&stage_bar[l]) {
                                *dst += src * a;
                            }
                        }
                    }
                    // Ȳ_i = (−i s H)† k̄_i = i s H k̄_i
                    stepper.eval_adjoint(c, &kbar[i], &mut scratch);
                    stage_bar[i].copy_from_slice(&scratch);
                    accumulate_coefficient_grads(&op, &kbar[i], &ys[i], *k, &mut out);
                }
                for sb in &stage_bar {
                    for (dst, src) in ybar.iter_mut().zip(sb) {
                        *dst += src;
                    }
                }
            }
        }
        for v in out.gx.iter_mut().chain(&mut out.gy).chain(&mut out.gz).chain(&mut out.pairs) {
            *v *= NS_SCALE;
        }
        Ok(out)
    }
}

/// Adds `Im⟨k̄, G y⟩` for each generator `G` of the Hamiltonian.
fn accumulate_coefficient_grads(
    op: &IsingOperator,
    kbar: &[Complex64],
    y: &[Complex64],
    k: usize,
    out: &mut CoefficientGrads,
) {
    let dim = op.dim();
    let (mut gx, mut gy, mut gz) = (0.0, 0.0, 0.0);
    for (kc, yc) in kbar.chunks_exact(dim).zip(y.chunks_exact(dim)) {
        for b in 0..dim {
            let cb = kc[b].conj();
            let mut xs = Complex64::new(0.0, 0.0);
            let mut ys = Complex64::new(0.0, 0.0);
            for &m in &op.masks {
                let v = yc[b ^ m];
                xs += v;
                // σʸ: ⟨1|σʸ|0⟩ = −i, ⟨0|σʸ|1⟩ = i
                ys += if b & m != 0 { Complex64::new(v.im, -v.re) } else { Complex64::new(-v.im, v.re) };
            }
            gx += (cb * xs).im;
            gy += (cb * ys).im;
            let diag = (cb * yc[b]).im;
            gz += op.zsum[b] * diag;
            for (p, &(_, _, mask)) in op.pairs.iter().enumerate() {
                if b & mask == mask {
                    out.pairs[p] += diag;
                }
            }
        }
    }
    out.gx[k] += gx;
    out.gy[k] += gy;
    out.gz[k] += gz;
}

impl BackwardOp for PropagateOp {
    fn backward(&self, inputs: &[&[f64]], _: &[f64], grad_out: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let cg = self.coefficient_grads(inputs[3], grad_out)?;
        let (amp, phase) = (inputs[0], inputs[2]);
        for k in 0..self.coeffs.len() {
            let (s, c) = phase[k].sin_cos();
            // gx = (Ω/2)cos φ, gy = −(Ω/2)sin φ, gz = −δ/2
            grads[0][k] += 0.5 * (cg.gx[k] * c - cg.gy[k] * s);
            grads[1][k] += -0.5 * cg.gz[k];
            grads[2][k] += -0.5 * amp[k] * (cg.gx[k] * s + cg.gy[k] * c);
        }
        for (g, v) in grads[3].iter_mut().zip(&cg.pairs) {
            *g += v;
        }
        Ok(())
    }
}
