// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::Array2;
use num_complex::Complex64;

use super::hamiltonian::{qubit_mask, HamiltonianProgram};
use super::integrator::{propagate, SolverOptions};
use super::state::StateBatch;
use crate::error::{Error, Result};

/// Register size limit for building full unitaries.
pub const MAX_UNITARY_QUBITS: usize = 10;

/// Hermiticity tolerance for observables.
const HERMITIAN_TOL: f64 = 1e-12;

/// Propagates every basis state and returns the columns as `U`.
pub fn reconstruct_unitary(program: &HamiltonianProgram, opts: &SolverOptions) -> Result<Array2<Complex64>> {
    if program.n_qubits() > MAX_UNITARY_QUBITS {
        return Err(Error::TooManyQubits {
            n: program.n_qubits(),
            max: MAX_UNITARY_QUBITS,
        });
    }
    let opts = SolverOptions {
        store_every: None,
        ..opts.clone()
    };
    let id = StateBatch::identity(program.dim())?;
    Ok(propagate(program, &id, &opts)?.final_state().to_matrix())
}

pub fn hermitian_residual(m: &Array2<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for ((i, j), v) in m.indexed_iter() {
        worst = worst.max((v - m[[j, i]].conj()).norm());
    }
    worst
}

/// `⟨ψ|C|ψ⟩` for a Hermitian `C`.
pub fn expectation(state: &[Complex64], observable: &Array2<Complex64>) -> Result<f64> {
    let dim = state.len();
    if observable.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "observable {:?} for a state of length {dim}",
            observable.dim()
        )));
    }
    let r = hermitian_residual(observable);
    if r > HERMITIAN_TOL {
        return Err(Error::NotHermitian(r));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, row) in observable.outer_iter().enumerate() {
        let cpsi: Complex64 = row.iter().zip(state).map(|(c, p)| c * p).sum();
        acc += state[i].conj() * cpsi;
    }
    Ok(acc.re)
}

fn check_square_pair(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<()> {
    let (r, c) = a.dim();
    if r != c || a.dim() != b.dim() || !r.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "unitaries {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `Tr(U_sim† U_target)`.
pub fn trace_overlap(u_sim: &Array2<Complex64>, u_target: &Array2<Complex64>) -> Result<Complex64> {
    check_square_pair(u_sim, u_target)?;
    Ok(u_sim
        .iter()
        .zip(u_target.iter())
        .map(|(s, t)| s.conj() * t)
        .sum())
}

/// `|Tr(U_sim† U_target)| / 2^N`.
pub fn unitary_fidelity(u_sim: &Array2<Complex64>, u_target: &Array2<Complex64>) -> Result<f64> {
    let z = trace_overlap(u_sim, u_target)?;
    Ok(z.norm() / u_sim.nrows() as f64)
}

/// `|⟨ψ|φ⟩|²`.
pub fn state_fidelity(psi: &[Complex64], target: &[Complex64]) -> Result<f64> {
    if psi.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "states of length {} and {}",
            psi.len(),
            target.len()
        )));
    }
    let z: Complex64 = psi.iter().zip(target).map(|(p, t)| p.conj() * t).sum();
    Ok(z.norm_sqr())
}

/// `H^{⊗N}`.
pub fn hadamard_target(n_qubits: usize) -> Result<Array2<Complex64>> {
    if n_qubits == 0 {
        return Err(Error::invalid("n_qubits", "must be at least 1"));
    }
    if n_qubits > MAX_UNITARY_QUBITS {
        return Err(Error::TooManyQubits {
            n: n_qubits,
            max: MAX_UNITARY_QUBITS,
        });
    }
    let dim = 1usize << n_qubits;
    let scale = FRAC_1_SQRT_2.powi(n_qubits as i32);
    // ⟨r|H^{⊗N}|c⟩ = 2^{−N/2} (−1)^{popcount(r & c)}
    Ok(Array2::from_shape_fn((dim, dim), |(r, c)| {
        let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign * scale, 0.0)
    }))
}

/// Diagonal `Σ_j n_j`, the number of Rydberg excitations.
pub fn rydberg_number(n_qubits: usize) -> Array2<Complex64> {
    let dim = 1usize << n_qubits;
    Array2::from_shape_fn((dim, dim), |(r, c)| {
        if r == c {
            Complex64::new(r.count_ones() as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Diagonal `n_j` of one atom.
pub fn rydberg_projector(n_qubits: usize, j: usize) -> Result<Array2<Complex64>> {
    if j >= n_qubits {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: n_qubits,
        });
    }
    let dim = 1usize << n_qubits;
    let m = qubit_mask(n_qubits, j);
    Ok(Array2::from_shape_fn((dim, dim), |(r, c)| {
        if r == c && r & m != 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}
