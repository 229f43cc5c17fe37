// SPDX-License-Identifier: Apache-2.0

//! Sine interpolation of `M` control values onto the 1 ns sampling grid.
//!
//! Controls sit on the uniform grid `t_m = mΔ`, `Δ = τ/(M+1)`, with two
//! virtual zero controls at `t = 0` and `t = τ`. Between neighbouring nodes
//! the waveform blends the two controls with the smooth transition
//! `s(h) = (1 + sin(πh − π/2))/2`, so every sample is a convex combination of
//! at most two controls (and the zero boundary).

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Smooth 0→1 transition on `[0, 1]` with zero slope at both ends.
pub fn sine_transition(h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::invalid("h", format!("{h} is outside [0, 1]")));
    }
    Ok(sine_transition_unchecked(h))
}

#[inline]
pub(crate) fn sine_transition_unchecked(h: f64) -> f64 {
    (1.0 + (PI * h - FRAC_PI_2).sin()) / 2.0
}

/// One row of the interpolation matrix: up to two `(column, weight)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Row {
    entries: [(usize, f64); 2],
    len: u8,
}

impl Row {
    fn entries(&self) -> &[(usize, f64)] {
        &self.entries[..self.len as usize]
    }
}

/// Sparse `τ × M` matrix `A` with `w = A·θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationMatrix {
    tau: usize,
    n_controls: usize,
    rows: Vec<Row>,
}

impl InterpolationMatrix {
    /// Builds `A` for `n_controls` controls over `tau` ns. Requires Δ ≥ 1 ns.
    pub fn new(n_controls: usize, tau: usize) -> Result<Self> {
        if n_controls == 0 {
            return Err(Error::invalid("n_controls", "must be at least 1"));
        }
        if tau < n_controls + 1 {
            return Err(Error::invalid(
                "duration",
                format!("{tau} ns gives a node spacing below 1 ns for {n_controls} controls"),
            ));
        }
        let segments = n_controls + 1;
        let rows = (0..tau)
            .map(|k| {
                // m = floor(k / Δ) and h = (k − mΔ)/Δ, both in exact integer arithmetic.
                let scaled = k * segments;
                let m = scaled / tau;
                let h = (scaled - m * tau) as f64 / tau as f64;
                let s = sine_transition_unchecked(h);
                let mut row = Row {
                    entries: [(0, 0.0); 2],
                    len: 0,
                };
                // node m carries θ_m for 1 ≤ m ≤ M; nodes 0 and M+1 are the zero boundary
                if (1..=n_controls).contains(&m) {
                    row.entries[row.len as usize] = (m - 1, 1.0 - s);
                    row.len += 1;
                }
                if (1..=n_controls).contains(&(m + 1)) && s != 0.0 {
                    row.entries[row.len as usize] = (m, s);
                    row.len += 1;
                }
                row
            })
            .collect();
        Ok(Self {
            tau,
            n_controls,
            rows,
        })
    }

    pub fn duration(&self) -> usize {
        self.tau
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    /// Node spacing Δ in ns.
    pub fn step(&self) -> f64 {
        self.tau as f64 / (self.n_controls + 1) as f64
    }

    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        self.rows[k].entries()
    }

    pub fn row_sum(&self, k: usize) -> f64 {
        self.row(k).iter().map(|e| e.1).sum()
    }

    /// Whether row `k` lies strictly between the first and last control node,
    /// so its weights sum to one.
    pub fn is_interior_row(&self, k: usize) -> bool {
        let m = k * (self.n_controls + 1) / self.tau;
        m >= 1 && m < self.n_controls
            || (m == self.n_controls && k * (self.n_controls + 1) == m * self.tau)
    }

    /// `A·θ`.
    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n_controls {
            return Err(Error::ShapeMismatch {
                name: "controls".into(),
                expected: self.n_controls,
                got: theta.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.entries().iter().map(|&(c, w)| w * theta[c]).sum())
            .collect())
    }

    /// `Aᵀ·g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.tau);
        let mut out = vec![0.0; self.n_controls];
        for (r, &gk) in self.rows.iter().zip(g) {
            for &(c, w) in r.entries() {
                out[c] += w * gk;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.tau, self.n_controls));
        for (k, r) in self.rows.iter().enumerate() {
            for &(c, w) in r.entries() {
                a[[k, c]] = w;
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the piecewise blend at time `t`, virtual zeros included.
    fn blend_at(theta: &[f64], tau: usize, t: f64) -> f64 {
        let m_ctrl = theta.len();
        let delta = tau as f64 / (m_ctrl + 1) as f64;
        let node = |m: usize| if m == 0 || m > m_ctrl { 0.0 } else { theta[m - 1] };
        let m = (t / delta).floor() as usize;
        let h = (t - m as f64 * delta) / delta;
        let s = (1.0 + (PI * h - FRAC_PI_2).sin()) / 2.0;
        node(m) * (1.0 - s) + node(m + 1) * s
    }

    #[test]
    fn transition_endpoints() {
        assert_eq!(sine_transition(0.0).unwrap(), 0.0);
        assert_eq!(sine_transition(1.0).unwrap(), 1.0);
        assert!((sine_transition(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(sine_transition(1.5).is_err());
        assert!(sine_transition(-0.1).is_err());
    }

    #[test]
    fn transition_is_monotone_with_flat_ends() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let s = sine_transition(i as f64 / 1000.0).unwrap();
            assert!(s >= prev);
            prev = s;
        }
        let eps = 1e-6;
        let d0 = (sine_transition(eps).unwrap() - sine_transition(0.0).unwrap()) / eps;
        let d1 = (sine_transition(1.0).unwrap() - sine_transition(1.0 - eps).unwrap()) / eps;
        assert!(d0.abs() < 1e-5 && d1.abs() < 1e-5);
    }

    #[test]
    fn single_control_two_samples() {
        let a = InterpolationMatrix::new(1, 2).unwrap();
        assert_eq!(a.step(), 1.0);
        let w = a.apply(&[3.7]).unwrap();
        assert_eq!(w, vec![0.0, 3.7]);
    }

    #[test]
    fn gate_control_shape() {
        let a = InterpolationMatrix::new(20, 1100).unwrap();
        assert_eq!(a.to_dense().dim(), (1100, 20));
        assert!((0..1100).all(|k| a.row(k).len() <= 2));
    }

    #[test]
    fn matches_direct_blend() {
        let theta: Vec<f64> = (0..7).map(|i| (i as f64 * 1.3).sin() * 4.0).collect();
        for tau in [9usize, 37, 100, 333] {
            let a = InterpolationMatrix::new(theta.len(), tau).unwrap();
            let w = a.apply(&theta).unwrap();
            for (k, wk) in w.iter().enumerate() {
                let direct = blend_at(&theta, tau, k as f64);
                assert!((wk - direct).abs() < 1e-12, "tau {tau} k {k}: {wk} vs {direct}");
            }
        }
    }

    #[test]
    fn constant_controls_reproduced_on_interior_rows() {
        let c = 2.5;
        let (m, tau) = (10, 1100);
        let a = InterpolationMatrix::new(m, tau).unwrap();
        let w = a.apply(&vec![c; m]).unwrap();
        for k in 0..tau {
            let direct = blend_at(&vec![c; m], tau, k as f64);
            assert!((w[k] - direct).abs() < 1e-12);
            if a.is_interior_row(k) {
                assert!((w[k] - c).abs() < 1e-12, "row {k}");
            } else {
                assert!(w[k] <= c + 1e-12);
            }
        }
    }

    #[test]
    fn nodes_are_interpolated_exactly() {
        // τ divisible by M+1 puts every node on an integer ns
        let theta = [1.0, -2.0, 0.5, 3.0];
        let a = InterpolationMatrix::new(4, 50).unwrap();
        let w = a.apply(&theta).unwrap();
        for (m, th) in theta.iter().enumerate() {
            let k = (m + 1) * 10;
            assert!((w[k] - th).abs() < 1e-12);
        }
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn rejects_subnanosecond_spacing() {
        assert!(InterpolationMatrix::new(5, 5).is_err());
        assert!(InterpolationMatrix::new(0, 10).is_err());
        assert!(InterpolationMatrix::new(5, 6).is_ok());
    }

    #[test]
    fn transpose_is_adjoint() {
        let a = InterpolationMatrix::new(6, 83).unwrap();
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let g: Vec<f64> = (0..83).map(|k| (k as f64 * 0.1).cos()).collect();
        let ax = a.apply(&x).unwrap();
        let atg = a.apply_transpose(&g);
        let lhs: f64 = ax.iter().zip(&g).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(&atg).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
