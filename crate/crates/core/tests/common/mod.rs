// SPDX-License-Identifier: Apache-2.0

//! Dense matrix-exponential reference shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydopt::domain::{DeviceSpec, Layout, Register};
use rydopt::dynamics::{build_hamiltonian_step, interaction_matrix, HamiltonianProgram};
use rydopt::waveforms::DiscretizedDrive;

pub fn random_program(n: usize, tau: usize, seed: u64) -> HamiltonianProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let four_pi = 4.0 * std::f64::consts::PI;
    // smooth random drive: a few random Fourier modes inside the device bounds
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..20.0), rng.gen_range(0.0..6.3)))
        .collect();
    let wave = |k: usize, shift: f64| -> f64 {
        let t = k as f64 / tau as f64;
        modes
            .iter()
            .map(|(a, f, p)| a * (f * t + p + shift).sin())
            .sum::<f64>()
            / 3.0
    };
    let amp = (0..tau).map(|k| four_pi * (0.5 + 0.5 * wave(k, 0.0))).collect();
    let det = (0..tau).map(|k| four_pi * wave(k, 1.3)).collect();
    let phase = vec![rng.gen_range(0.0..6.28); tau];
    let reg = Register::build(Layout::Linear, 6.5, n).unwrap();
    HamiltonianProgram::new(
        n,
        DiscretizedDrive::new(amp, det, phase).unwrap(),
        interaction_matrix(&reg, &DeviceSpec::default()),
    )
    .unwrap()
}

pub fn oracle_final(program: &HamiltonianProgram, psi0: &[Complex64]) -> Vec<Complex64> {
    let dim = program.dim();
    let mut psi = nalgebra::DVector::from_column_slice(psi0);
    for k in 0..program.duration_ns() {
        let h = build_hamiltonian_step(program, k).unwrap();
        let m = DMatrix::from_fn(dim, dim, |r, c| h[[r, c]] * Complex64::new(0.0, -1e-3));
        psi = m.exp() * psi;
    }
    psi.iter().copied().collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
