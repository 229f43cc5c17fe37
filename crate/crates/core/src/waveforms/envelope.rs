// SPDX-License-Identifier: Apache-2.0

//! Smooth piecewise-constant envelopes with continuous pulse boundaries.
//!
//! A run of constant pulses with levels `c_k` and durations `d_k` is written
//! as `E(t) = Σ_k c_k [S(κ(t − s_k)) − S(κ(t − e_k))]` where `S` is a smooth
//! step, `s_k`/`e_k` are cumulative start/end times and κ the edge steepness.
//! `E` is differentiable in every `d_k`, which is what makes total duration a
//! continuous parameter on a fixed 1 ns grid.

use serde::{Deserialize, Serialize};

/// Shape of the smooth step `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeProfile {
    /// Gaussian CDF `(1 + erf(x))/2`. Converges to the step within a few 1/κ.
    #[default]
    Erf,
    /// Logistic `1/(1 + e^{−x})`. Exponential tails, noticeably slower.
    Logistic,
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

impl EdgeProfile {
    pub fn step(self, x: f64) -> f64 {
        match self {
            EdgeProfile::Erf => 0.5 * (1.0 + libm::erf(x)),
            EdgeProfile::Logistic => super::transforms::logistic(x),
        }
    }

    pub fn step_derivative(self, x: f64) -> f64 {
        match self {
            EdgeProfile::Erf => 0.5 * FRAC_2_SQRT_PI * (-x * x).exp(),
            EdgeProfile::Logistic => {
                let s = super::transforms::logistic(x);
                s * (1.0 - s)
            }
        }
    }
}

/// Sample times (ns) are the midpoints `k + 1/2` of each 1 ns slot.
#[inline]
fn sample_time(k: usize) -> f64 {
    k as f64 + 0.5
}

/// Grid length `ceil(1000 · Σ d)` for durations in µs.
pub fn grid_len(durations_us: &[f64]) -> usize {
    let total_ns: f64 = durations_us.iter().sum::<f64>() * 1000.0;
    // absorb rounding noise such as 0.1 + 0.3 = 0.4000000000000001
    (total_ns - 1e-9).ceil().max(1.0) as usize
}

/// Start and end of every window in ns.
pub fn edges_ns(durations_us: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut starts = Vec::with_capacity(durations_us.len());
    let mut ends = Vec::with_capacity(durations_us.len());
    let mut t = 0.0;
    for &d in durations_us {
        starts.push(t);
        t += 1000.0 * d;
        ends.push(t);
    }
    (starts, ends)
}

/// Envelope samples on `len` 1 ns slots.
pub fn envelope(
    levels: &[f64],
    durations_us: &[f64],
    kappa: f64,
    profile: EdgeProfile,
    len: usize,
) -> Vec<f64> {
    debug_assert_eq!(levels.len(), durations_us.len());
    let (starts, ends) = edges_ns(durations_us);
    (0..len)
        .map(|k| {
            let t = sample_time(k);
            levels
                .iter()
                .zip(starts.iter().zip(&ends))
                .map(|(c, (s, e))| c * (profile.step(kappa * (t - s)) - profile.step(kappa * (t - e))))
                .sum()
        })
        .collect()
}

/// Vector-Jacobian product of [`envelope`]: returns `(∂/∂levels, ∂/∂durations)`
/// contracted with the sample adjoint `g`.
pub fn envelope_vjp(
    levels: &[f64],
    durations_us: &[f64],
    kappa: f64,
    profile: EdgeProfile,
    g: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = levels.len();
    let (starts, ends) = edges_ns(durations_us);
    let mut grad_levels = vec![0.0; n];
    // a_k = Σ_t g κ S'(κ(t − s_k)), b_k = Σ_t g κ S'(κ(t − e_k))
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        let t = sample_time(k);
        for p in 0..n {
            let xs = kappa * (t - starts[p]);
            let xe = kappa * (t - ends[p]);
            grad_levels[p] += gk * (profile.step(xs) - profile.step(xe));
            a[p] += gk * kappa * profile.step_derivative(xs);
            b[p] += gk * kappa * profile.step_derivative(xe);
        }
    }
    // s_p depends on d_l for l < p, e_p on d_l for l ≤ p; both scale by 1000 ns/µs.
    let mut grad_durations = vec![0.0; n];
    let mut suffix = 0.0;
    for p in (0..n).rev() {
        // contribution of window p to every d_l with l ≤ p through e_p
        // and to every d_l with l < p through s_p
        let through_end = levels[p] * b[p];
        let through_start = -levels[p] * a[p];
        grad_durations[p] += 1000.0 * (suffix + through_end);
        suffix += through_end + through_start;
    }
    (grad_levels, grad_durations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_length_rounds_up() {
        assert_eq!(grid_len(&[0.4]), 400);
        assert_eq!(grid_len(&[0.1, 0.3]), 400);
        assert_eq!(grid_len(&[0.4004]), 401);
    }

    #[test]
    fn single_pulse_envelope() {
        let env = envelope(&[3.0], &[0.4], 1.0, EdgeProfile::Erf, 700);
        assert!((env[200] - 3.0).abs() < 1e-3);
        assert!(env[600].abs() < 1e-3);
        for (k, v) in env.iter().enumerate() {
            let t = k as f64 + 0.5;
            if t >= 5.0 && t <= 395.0 {
                assert!((v - 3.0).abs() < 1e-3, "t = {t}");
            }
        }
    }

    #[test]
    fn logistic_edges_are_slower() {
        // 5 ns from an edge the logistic step is still 6.7e-3 away from 1
        let s = EdgeProfile::Logistic.step(5.0);
        assert!((1.0 - s) > 6e-3);
        assert!((1.0 - EdgeProfile::Erf.step(5.0)) < 1e-11);
    }

    #[test]
    fn two_pulse_midpoint() {
        let env = envelope(&[1.0, 2.5], &[0.2, 0.3], 1.0, EdgeProfile::Erf, 500);
        assert!((env[350] - 2.5).abs() < 1e-6);
        assert!((env[100] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let levels = [1.0, -0.5, 2.0];
        let durs = [0.0123, 0.0071, 0.0199];
        let len = 45;
        let g: Vec<f64> = (0..len).map(|k| ((k as f64) * 0.37).sin()).collect();
        for profile in [EdgeProfile::Erf, EdgeProfile::Logistic] {
            let f = |lv: &[f64], dv: &[f64]| -> f64 {
                envelope(lv, dv, 0.8, profile, len)
                    .iter()
                    .zip(&g)
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let (gl, gd) = envelope_vjp(&levels, &durs, 0.8, profile, &g);
            for i in 0..3 {
                let h = 1e-6;
                let mut lp = levels;
                let mut lm = levels;
                lp[i] += h;
                lm[i] -= h;
                let fd = (f(&lp, &durs) - f(&lm, &durs)) / (2.0 * h);
                assert!((fd - gl[i]).abs() < 1e-7);
                let h = 1e-7;
                let mut dp = durs;
                let mut dm = durs;
                dp[i] += h;
                dm[i] -= h;
                let fd = (f(&levels, &dp) - f(&levels, &dm)) / (2.0 * h);
                assert!((fd - gd[i]).abs() < 1e-5 * fd.abs().max(1.0), "{profile:?} d{i}: {fd} vs {}", gd[i]);
            }
        }
    }
}
