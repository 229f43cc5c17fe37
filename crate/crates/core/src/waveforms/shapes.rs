// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::interpolation::InterpolationMatrix;
use super::transforms::ControlTransform;
use crate::domain::params::ParameterSet;
use crate::domain::pulse::Scalar;
use crate::error::{Error, Result};

/// Length of one sample in µs.
pub const SAMPLE_DT_US: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WaveformKind {
    Constant {
        value: Scalar,
    },
    /// Linear from `start` (first sample) towards `stop` (excluded).
    Ramp {
        start: Scalar,
        stop: Scalar,
    },
    /// Blackman window whose samples integrate to `area` (rad).
    Blackman {
        area: Scalar,
    },
    /// Sine-interpolated controls after a bounding transform.
    Custom {
        controls: String,
        n_controls: usize,
        transform: ControlTransform,
        gamma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    #[serde(flatten)]
    pub kind: WaveformKind,
    pub duration_ns: usize,
}

fn check_duration(duration_ns: usize) -> Result<()> {
    if duration_ns == 0 {
        return Err(Error::invalid("duration_ns", "must be at least 1"));
    }
    Ok(())
}

impl WaveformSpec {
    pub fn constant(duration_ns: usize, value: impl Into<Scalar>) -> Result<Self> {
        check_duration(duration_ns)?;
        Ok(Self {
            kind: WaveformKind::Constant {
                value: value.into(),
            },
            duration_ns,
        })
    }

    pub fn ramp(duration_ns: usize, start: impl Into<Scalar>, stop: impl Into<Scalar>) -> Result<Self> {
        check_duration(duration_ns)?;
        Ok(Self {
            kind: WaveformKind::Ramp {
                start: start.into(),
                stop: stop.into(),
            },
            duration_ns,
        })
    }

    pub fn blackman(duration_ns: usize, area: impl Into<Scalar>) -> Result<Self> {
        check_duration(duration_ns)?;
        let area = area.into();
        if let Scalar::Value(a) = area {
            check_area(a)?;
        }
        Ok(Self {
            kind: WaveformKind::Blackman { area },
            duration_ns,
        })
    }

    pub fn custom(
        duration_ns: usize,
        controls: impl Into<String>,
        n_controls: usize,
        transform: ControlTransform,
        gamma: f64,
    ) -> Result<Self> {
        check_duration(duration_ns)?;
        if !(gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        // validates Δ ≥ 1 ns
        InterpolationMatrix::new(n_controls, duration_ns)?;
        Ok(Self {
            kind: WaveformKind::Custom {
                controls: controls.into(),
                n_controls,
                transform,
                gamma,
            },
            duration_ns,
        })
    }

    pub fn variables(&self) -> Vec<&str> {
        match &self.kind {
            WaveformKind::Constant { value } => value.var_name().into_iter().collect(),
            WaveformKind::Ramp { start, stop } => {
                start.var_name().into_iter().chain(stop.var_name()).collect()
            }
            WaveformKind::Blackman { area } => area.var_name().into_iter().collect(),
            WaveformKind::Custom { controls, .. } => vec![controls.as_str()],
        }
    }
}

fn check_area(area: f64) -> Result<()> {
    if !(area > 0.0) {
        return Err(Error::invalid("area", "blackman area must be positive"));
    }
    Ok(())
}

/// Blackman window of `duration_ns` samples scaled to unit area
/// (`Σ w · 1 ns = 1 rad` with samples in rad/µs).
pub fn blackman_window(duration_ns: usize) -> Vec<f64> {
    let raw: Vec<f64> = if duration_ns == 1 {
        vec![1.0]
    } else {
        let denom = (duration_ns - 1) as f64;
        (0..duration_ns)
            .map(|n| {
                let x = n as f64 / denom;
                (0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()).max(0.0)
            })
            .collect()
    };
    let norm = raw.iter().sum::<f64>() * SAMPLE_DT_US;
    raw.into_iter().map(|w| w / norm).collect()
}

/// Ramp shape: sample `k` equals `start + (stop − start)·k/τ`.
pub fn ramp_weights(duration_ns: usize) -> Vec<f64> {
    (0..duration_ns)
        .map(|k| k as f64 / duration_ns as f64)
        .collect()
}

/// Samples a waveform on the 1 ns grid.
pub fn sample_waveform(spec: &WaveformSpec, params: &ParameterSet) -> Result<Vec<f64>> {
    let n = spec.duration_ns;
    match &spec.kind {
        WaveformKind::Constant { value } => Ok(vec![value.resolve(params)?; n]),
        WaveformKind::Ramp { start, stop } => {
            let (a, b) = (start.resolve(params)?, stop.resolve(params)?);
            Ok(ramp_weights(n).into_iter().map(|u| a + (b - a) * u).collect())
        }
        WaveformKind::Blackman { area } => {
            let area = area.resolve(params)?;
            check_area(area)?;
            Ok(blackman_window(n).into_iter().map(|w| w * area).collect())
        }
        WaveformKind::Custom {
            controls,
            n_controls,
            transform,
            gamma,
        } => {
            let theta = params.value(controls)?.as_slice();
            if theta.len() != *n_controls {
                return Err(Error::ShapeMismatch {
                    name: controls.clone(),
                    expected: *n_controls,
                    got: theta.len(),
                });
            }
            let a = InterpolationMatrix::new(*n_controls, n)?;
            let w = a.apply(&transform.apply(theta, *gamma))?;
            Ok(w.into_iter().map(|x| transform.clip(x)).collect())
        }
    }
}
