// SPDX-License-Identifier: Apache-2.0

//! Real-valued figures of merit on packed complex states.

use ndarray::Array2;
use num_complex::Complex64;

use super::propagation::{pack, unpack};
use super::tape::{BackwardOp, Tape, Var};
use crate::dynamics::hermitian_residual;
use crate::error::{Error, Result};

/// Largest tolerated imaginary part of a real-by-construction loss.
pub const IMAG_TOL: f64 = 1e-8;

/// `1 − |Tr(U† T)| / d` where the packed state holds the `d` columns of `U`.
pub fn unitary_infidelity(tape: &mut Tape, state: Var, target: &Array2<Complex64>) -> Result<Var> {
    let (d, c) = target.dim();
    if d != c || tape.len(state) != 2 * d * d {
        return Err(Error::DimensionMismatch(format!(
            "packed state of {} reals against a {d}×{c} target",
            tape.len(state)
        )));
    }
    // column-major packing: U[r, c] sits at index c·d + r
    let t: Vec<Complex64> = (0..d * d).map(|i| target[[i % d, i / d]]).collect();
    let u = unpack(tape.value(state));
    let z: Complex64 = u.iter().zip(&t).map(|(a, b)| a.conj() * b).sum();
    let value = 1.0 - z.norm() / d as f64;
    Ok(tape.custom(&[state], vec![value], Box::new(UnitaryOp { t, z, d })))
}

struct UnitaryOp {
    t: Vec<Complex64>,
    z: Complex64,
    d: usize,
}

impl BackwardOp for UnitaryOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let norm = self.z.norm();
        if norm == 0.0 {
            // |z| is not differentiable at 0; use the zero subgradient
            return Ok(());
        }
        // ∂|z|/∂U = conj(z) T / |z|
        let w = -g[0] * self.z.conj() / (norm * self.d as f64);
        let adj: Vec<Complex64> = self.t.iter().map(|t| w * t).collect();
        grads[0].iter_mut().zip(pack(&adj)).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

/// `1 − |⟨t|ψ⟩|²` for a single packed state column.
pub fn state_infidelity(tape: &mut Tape, state: Var, target: &[Complex64]) -> Result<Var> {
    if tape.len(state) != 2 * target.len() {
        return Err(Error::DimensionMismatch(format!(
            "packed state of {} reals against a target of length {}",
            tape.len(state),
            target.len()
        )));
    }
    let psi = unpack(tape.value(state));
    let z: Complex64 = target.iter().zip(&psi).map(|(t, p)| t.conj() * p).sum();
    let value = 1.0 - z.norm_sqr();
    Ok(tape.custom(
        &[state],
        vec![value],
        Box::new(StateOp {
            t: target.to_vec(),
            z,
        }),
    ))
}

struct StateOp {
    t: Vec<Complex64>,
    z: Complex64,
}

impl BackwardOp for StateOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let w = -2.0 * g[0] * self.z;
        let adj: Vec<Complex64> = self.t.iter().map(|t| w * t).collect();
        grads[0].iter_mut().zip(pack(&adj)).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

/// `⟨ψ|C|ψ⟩` for a single packed state column and Hermitian `C`.
pub fn expectation_value(tape: &mut Tape, state: Var, observable: &Array2<Complex64>) -> Result<Var> {
    let d = observable.nrows();
    if observable.dim() != (d, d) || tape.len(state) != 2 * d {
        return Err(Error::DimensionMismatch(format!(
            "packed state of {} reals against a {:?} observable",
            tape.len(state),
            observable.dim()
        )));
    }
    let r = hermitian_residual(observable);
    if r > 1e-12 {
        return Err(Error::NotHermitian(r));
    }
    let psi = unpack(tape.value(state));
    let cpsi: Vec<Complex64> = observable
        .outer_iter()
        .map(|row| row.iter().zip(&psi).map(|(c, p)| c * p).sum())
        .collect();
    let e: Complex64 = psi.iter().zip(&cpsi).map(|(p, c)| p.conj() * c).sum();
    if e.im.abs() > IMAG_TOL {
        return Err(Error::ComplexLoss(e.im));
    }
    Ok(tape.custom(&[state], vec![e.re], Box::new(ExpectationOp { cpsi })))
}

struct ExpectationOp {
    cpsi: Vec<Complex64>,
}

impl BackwardOp for ExpectationOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let adj: Vec<Complex64> = self.cpsi.iter().map(|c| c * (2.0 * g[0])).collect();
        grads[0].iter_mut().zip(pack(&adj)).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

/// `(value − target)²`.
pub fn mse(tape: &mut Tape, value: Var, target: f64) -> Result<Var> {
    let t = tape.constant(vec![target; tape.len(value)]);
    let diff = tape.sub(value, t)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / tape.len(value) as f64))
}

/// Plain-number version of [`mse`].
pub fn mse_loss(value: f64, target: f64) -> f64 {
    (value - target).powi(2)
}

/// `‖ψ‖²` summed over packed columns.
pub fn squared_norm(tape: &mut Tape, state: Var) -> Var {
    let sq = tape.square(state);
    tape.sum(sq)
}
