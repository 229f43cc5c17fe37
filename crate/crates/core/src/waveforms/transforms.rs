// SPDX-License-Identifier: Apache-2.0

//! Bounded reparameterizations of unconstrained control values.

use serde::{Deserialize, Serialize};

/// Slope factor γ used for both amplitude and detuning controls.
pub const DEFAULT_GAMMA: f64 = 0.05;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `Ω_max · σ(γθ)` elementwise; lands strictly inside `(0, Ω_max)` for finite θ
/// of moderate size.
pub fn transform_amplitude_controls(theta: &[f64], omega_max: f64, gamma: f64) -> Vec<f64> {
    theta.iter().map(|&t| omega_max * logistic(gamma * t)).collect()
}

/// `|δ_max| · tanh(γθ)` elementwise.
pub fn transform_detuning_controls(theta: &[f64], det_max: f64, gamma: f64) -> Vec<f64> {
    theta.iter().map(|&t| det_max.abs() * (gamma * t).tanh()).collect()
}

/// How custom-waveform controls are mapped before interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ControlTransform {
    /// `max · σ(γθ)`, for amplitudes in `[0, max]`.
    AmplitudeSigmoid { max: f64 },
    /// `|max| · tanh(γθ)`, for detunings in `[−|max|, |max|]`.
    DetuningTanh { max: f64 },
    Identity,
}

impl ControlTransform {
    pub fn apply(&self, theta: &[f64], gamma: f64) -> Vec<f64> {
        match *self {
            ControlTransform::AmplitudeSigmoid { max } => {
                transform_amplitude_controls(theta, max, gamma)
            }
            ControlTransform::DetuningTanh { max } => transform_detuning_controls(theta, max, gamma),
            ControlTransform::Identity => theta.to_vec(),
        }
    }

    /// Elementwise derivative `dθ′/dθ`.
    pub fn derivative(&self, theta: &[f64], gamma: f64) -> Vec<f64> {
        match *self {
            ControlTransform::AmplitudeSigmoid { max } => theta
                .iter()
                .map(|&t| {
                    let s = logistic(gamma * t);
                    max * gamma * s * (1.0 - s)
                })
                .collect(),
            ControlTransform::DetuningTanh { max } => theta
                .iter()
                .map(|&t| {
                    let th = (gamma * t).tanh();
                    max.abs() * gamma * (1.0 - th * th)
                })
                .collect(),
            ControlTransform::Identity => vec![1.0; theta.len()],
        }
    }

    /// Clamps an interpolated sample into [`Self::bounds`]. Interpolating two
    /// saturated controls can overshoot the bound by an ulp.
    pub fn clip(&self, x: f64) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => x.clamp(lo, hi),
            None => x,
        }
    }

    /// Closed interval that transformed values (and hence interpolated
    /// samples, together with the zero boundary) stay within.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ControlTransform::AmplitudeSigmoid { max } => Some((0.0, max)),
            ControlTransform::DetuningTanh { max } => Some((-max.abs(), max.abs())),
            ControlTransform::Identity => None,
        }
    }
}
