// SPDX-License-Identifier: Apache-2.0

//! The Rydberg Ising Hamiltonian
//!
//! ```text
//! H_k = Σ_j (Ω_k/2)[cos φ_k σˣ_j − sin φ_k σʸ_j] − Σ_j (δ_k/2) σᶻ_j + Σ_{i<j} U_ij n_i n_j
//! ```
//!
//! Basis states are bit strings with atom 0 in the most significant bit and
//! `1` the Rydberg level, so `σᶻ|1⟩ = |1⟩` and `n = |1⟩⟨1| = (1 + σᶻ)/2`.
//! The operator is applied matrix-free: the drive flips one bit at a time and
//! the detuning and interaction terms are diagonal.

use ndarray::Array2;
use num_complex::Complex64;

use crate::domain::device::DeviceSpec;
use crate::domain::params::ParameterSet;
use crate::domain::register::Register;
use crate::domain::sequence::Sequence;
use crate::error::{Error, Result};
use crate::waveforms::{sample_sequence, DiscretizedDrive};

/// Largest register the dense and batched-identity paths accept.
pub const MAX_QUBITS: usize = 14;

/// Bit mask of atom `j` in an `n`-atom basis index.
#[inline]
pub fn qubit_mask(n: usize, j: usize) -> usize {
    1 << (n - 1 - j)
}

/// `U_ij = C₆/r_ij⁶` for every pair, zero diagonal.
pub fn interaction_matrix(register: &Register, device: &DeviceSpec) -> Array2<f64> {
    let d = register.pairwise_distances();
    let n = register.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { device.interaction(d[[i, j]]) })
}

/// Everything needed to evolve a register under a sampled drive.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianProgram {
    n_qubits: usize,
    drive: DiscretizedDrive,
    interaction: Array2<f64>,
}

impl HamiltonianProgram {
    pub fn new(n_qubits: usize, drive: DiscretizedDrive, interaction: Array2<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("n_qubits", "must be at least 1"));
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                n: n_qubits,
                max: MAX_QUBITS,
            });
        }
        if interaction.dim() != (n_qubits, n_qubits) {
            return Err(Error::DimensionMismatch(format!(
                "interaction is {:?}, expected {n_qubits}×{n_qubits}",
                interaction.dim()
            )));
        }
        for i in 0..n_qubits {
            if interaction[[i, i]] != 0.0 {
                return Err(Error::invalid("interaction", "diagonal must be zero"));
            }
            for j in (i + 1)..n_qubits {
                let (a, b) = (interaction[[i, j]], interaction[[j, i]]);
                if a != b {
                    return Err(Error::invalid("interaction", "must be symmetric"));
                }
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::invalid("interaction", format!("U[{i}][{j}] = {a} must be positive")));
                }
            }
        }
        Ok(Self {
            n_qubits,
            drive,
            interaction,
        })
    }

    /// Samples `seq` with `params` and attaches the register interactions.
    pub fn from_sequence(seq: &Sequence, params: &ParameterSet) -> Result<Self> {
        let drive = sample_sequence(seq, params)?;
        Self::new(
            seq.n_qubits(),
            drive,
            interaction_matrix(seq.register(), seq.device()),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn drive(&self) -> &DiscretizedDrive {
        &self.drive
    }

    pub fn interaction(&self) -> &Array2<f64> {
        &self.interaction
    }

    /// τ in ns.
    pub fn duration_ns(&self) -> usize {
        self.drive.len()
    }

    /// Drive coefficients of sample `k`.
    pub fn coefficients(&self, k: usize) -> Result<DriveCoefficients> {
        if k >= self.duration_ns() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.duration_ns(),
            });
        }
        Ok(DriveCoefficients::new(
            self.drive.amp[k],
            self.drive.det[k],
            self.drive.phase[k],
        ))
    }

    pub fn operator(&self) -> IsingOperator {
        IsingOperator::new(self.n_qubits, &self.interaction)
    }
}

/// `H = gx Σσˣ + gy Σσʸ + gz Σσᶻ + Σ U n n` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCoefficients {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl DriveCoefficients {
    pub fn new(amp: f64, det: f64, phase: f64) -> Self {
        Self {
            gx: 0.5 * amp * phase.cos(),
            gy: -0.5 * amp * phase.sin(),
            gz: -0.5 * det,
        }
    }
}

/// Matrix-free action of the Ising Hamiltonian on state vectors.
#[derive(Debug, Clone)]
pub struct IsingOperator {
    pub(crate) n: usize,
    pub(crate) masks: Vec<usize>,
    /// `Σ_j σᶻ_j` eigenvalue per basis state: `2·popcount − N`.
    pub(crate) zsum: Vec<f64>,
    /// `Σ_{i<j} U_ij n_i n_j` per basis state.
    pub(crate) diag: Vec<f64>,
    /// `(i, j, mask_i | mask_j)` for every pair.
    pub(crate) pairs: Vec<(usize, usize, usize)>,
}

impl IsingOperator {
    pub fn new(n: usize, interaction: &Array2<f64>) -> Self {
        let dim = 1usize << n;
        let masks: Vec<usize> = (0..n).map(|j| qubit_mask(n, j)).collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j, masks[i] | masks[j]));
            }
        }
        let zsum = (0..dim)
            .map(|b| 2.0 * (b.count_ones() as f64) - n as f64)
            .collect();
        let diag = (0..dim)
            .map(|b| {
                pairs
                    .iter()
                    .filter(|p| b & p.2 == p.2)
                    .map(|&(i, j, _)| interaction[[i, j]])
                    .sum()
            })
            .collect();
        Self {
            n,
            masks,
            zsum,
            diag,
            pairs,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `out = scale · (−i) · H · psi` for one column; `scale` converts rad/µs to the time unit.
    #[inline]
    pub fn apply_generator(&self, c: &DriveCoefficients, scale: f64, psi: &[Complex64], out: &mut [Complex64]) {
        // ⟨1|h|0⟩ = gx − i·gy acts where the target bit is set, ⟨0|h|1⟩ = gx + i·gy otherwise
        let up = Complex64::new(c.gx, -c.gy);
        let down = Complex64::new(c.gx, c.gy);
        for (b, o) in out.iter_mut().enumerate() {
            let mut acc = psi[b] * (c.gz * self.zsum[b] + self.diag[b]);
            for &m in &self.masks {
                let coef = if b & m != 0 { up } else { down };
                acc += coef * psi[b ^ m];
            }
            // −i·acc
            *o = Complex64::new(acc.im * scale, -acc.re * scale);
        }
    }

    /// `out = H · psi`.
    pub fn apply(&self, c: &DriveCoefficients, psi: &[Complex64], out: &mut [Complex64]) {
        self.apply_generator(c, 1.0, psi, out);
        for o in out.iter_mut() {
            // undo the −i
            *o = Complex64::new(-o.im, o.re);
        }
    }

    /// Dense `H` for the given coefficients.
    pub fn to_dense(&self, c: &DriveCoefficients) -> Array2<Complex64> {
        let dim = self.dim();
        let mut h = Array2::zeros((dim, dim));
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            e.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            e[k] = Complex64::new(1.0, 0.0);
            self.apply(c, &e, &mut col);
            for (r, v) in col.iter().enumerate() {
                h[[r, k]] = *v;
            }
        }
        h
    }
}

/// Dense Hermitian `H_k` of the program at sample `k`.
pub fn build_hamiltonian_step(program: &HamiltonianProgram, k: usize) -> Result<Array2<Complex64>> {
    let c = program.coefficients(k)?;
    Ok(program.operator().to_dense(&c))
}

/// `Ω / J` with `J = C₆/r_min⁶` the nearest-neighbour interaction.
pub fn nn_interaction_ratio(register: &Register, device: &DeviceSpec, omega_max_reached: f64) -> Result<f64> {
    let r_min = register
        .min_distance()
        .ok_or_else(|| Error::Register("interaction ratio needs at least two atoms".into()))?;
    Ok(omega_max_reached / device.interaction(r_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::register::Layout;
    use std::f64::consts::PI;

    fn program(n: usize, spacing: f64, amp: f64, det: f64, phase: f64) -> HamiltonianProgram {
        let reg = Register::build(Layout::Linear, spacing, n).unwrap();
        HamiltonianProgram::new(
            n,
            DiscretizedDrive::constant(3, amp, det, phase).unwrap(),
            interaction_matrix(&reg, &DeviceSpec::default()),
        )
        .unwrap()
    }

    fn max_hermitian_residual(h: &Array2<Complex64>) -> f64 {
        let mut worst: f64 = 0.0;
        for ((i, j), v) in h.indexed_iter() {
            worst = worst.max((v - h[[j, i]].conj()).norm());
        }
        worst
    }

    #[test]
    fn zero_single_qubit() {
        let h = build_hamiltonian_step(&program(1, 5.0, 0.0, 0.0, 0.0), 0).unwrap();
        assert!(h.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_qubit_sigma_x() {
        let h = build_hamiltonian_step(&program(1, 5.0, 2.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(h[[0, 1]], Complex64::new(1.0, 0.0));
        assert_eq!(h[[1, 0]], Complex64::new(1.0, 0.0));
        assert_eq!(h[[0, 0]], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn detuning_sign() {
        // −(δ/2)σᶻ with σᶻ|1⟩ = |1⟩: the Rydberg level sits at −δ/2
        let h = build_hamiltonian_step(&program(1, 5.0, 0.0, 2.0, 0.0), 0).unwrap();
        assert_eq!(h[[0, 0]].re, 1.0);
        assert_eq!(h[[1, 1]].re, -1.0);
    }

    #[test]
    fn phase_rotates_drive_axis() {
        let phi = 0.7;
        let h = build_hamiltonian_step(&program(1, 5.0, 2.0, 0.0, phi), 0).unwrap();
        // (Ω/2)(cos φ σˣ − sin φ σʸ) has ⟨1|H|0⟩ = (Ω/2) e^{iφ}
        let expected = Complex64::from_polar(1.0, phi);
        assert!((h[[1, 0]] - expected).norm() < 1e-15);
        assert!((h[[0, 1]] - expected.conj()).norm() < 1e-15);
    }

    #[test]
    fn two_atom_interaction_only() {
        let h = build_hamiltonian_step(&program(2, 6.5, 0.0, 0.0, 0.0), 0).unwrap();
        let u = crate::domain::C6_RB_N60 / 6.5f64.powi(6);
        for ((i, j), v) in h.indexed_iter() {
            if (i, j) == (3, 3) {
                assert!((v.re - u).abs() < 1e-9 * u);
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }

    #[test]
    fn hermitian_for_general_drive() {
        let h = build_hamiltonian_step(&program(3, 6.0, 3.3, -1.2, 2.1), 2).unwrap();
        assert!(max_hermitian_residual(&h) < 1e-12);
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            build_hamiltonian_step(&program(1, 5.0, 0.0, 0.0, 0.0), 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn interaction_ratio() {
        let reg = Register::build(Layout::Linear, 7.0, 6).unwrap();
        let dev = DeviceSpec::default();
        let r = nn_interaction_ratio(&reg, &dev, 4.0 * PI).unwrap();
        assert!((r - 4.0 * PI * 7f64.powi(6) / dev.c6).abs() < 1e-12);
        let far = Register::build(Layout::Linear, 14.0, 6).unwrap();
        let r2 = nn_interaction_ratio(&far, &dev, 4.0 * PI).unwrap();
        assert!((r2 / r - 64.0).abs() < 1e-9);
        let single = Register::build(Layout::Linear, 7.0, 1).unwrap();
        assert!(nn_interaction_ratio(&single, &dev, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_interaction() {
        let drive = DiscretizedDrive::zeros(2).unwrap();
        let mut u = Array2::zeros((2, 2));
        assert!(HamiltonianProgram::new(2, drive.clone(), u.clone()).is_err());
        u[[0, 1]] = 1.0;
        assert!(HamiltonianProgram::new(2, drive.clone(), u.clone()).is_err());
        u[[1, 0]] = 1.0;
        assert!(HamiltonianProgram::new(2, drive, u).is_ok());
    }
}
