// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::domain::params::ParameterSet;
use crate::error::{Error, Result};
use crate::waveforms::{WaveformKind, WaveformSpec};

/// A scalar that is either a literal or a reference to a declared variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Value(f64),
    Var(String),
}

impl Scalar {
    pub fn var(name: impl Into<String>) -> Self {
        Scalar::Var(name.into())
    }

    pub fn resolve(&self, params: &ParameterSet) -> Result<f64> {
        match self {
            Scalar::Value(x) => Ok(*x),
            Scalar::Var(name) => params.scalar(name),
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Scalar::Value(_) => None,
            Scalar::Var(name) => Some(name),
        }
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Value(x)
    }
}

impl From<&str> for Scalar {
    fn from(name: &str) -> Self {
        Scalar::Var(name.to_string())
    }
}

/// Wraps a phase into `[0, 2π)`.
pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// One pulse on the global channel: amplitude and detuning envelopes plus a
/// constant phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub amplitude: WaveformSpec,
    pub detuning: WaveformSpec,
    pub phase: Scalar,
    /// Trainable duration in µs. Only valid when both waveforms are constant;
    /// the waveform `duration_ns` then holds the nominal length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_var: Option<String>,
}

impl Pulse {
    pub fn new(amplitude: WaveformSpec, detuning: WaveformSpec, phase: impl Into<Scalar>) -> Result<Self> {
        if amplitude.duration_ns != detuning.duration_ns {
            return Err(Error::invalid(
                "pulse",
                format!(
                    "amplitude lasts {} ns but detuning lasts {} ns",
                    amplitude.duration_ns, detuning.duration_ns
                ),
            ));
        }
        let phase = match phase.into() {
            Scalar::Value(p) => Scalar::Value(normalize_phase(p)),
            var => var,
        };
        Ok(Self {
            amplitude,
            detuning,
            phase,
            duration_var: None,
        })
    }

    /// Constant amplitude, detuning and phase for `duration_ns`.
    pub fn constant(
        duration_ns: usize,
        amplitude: impl Into<Scalar>,
        detuning: impl Into<Scalar>,
        phase: impl Into<Scalar>,
    ) -> Result<Self> {
        Self::new(
            WaveformSpec::constant(duration_ns, amplitude)?,
            WaveformSpec::constant(duration_ns, detuning)?,
            phase,
        )
    }

    /// Makes the duration a trainable µs-valued variable.
    pub fn with_duration_var(mut self, name: impl Into<String>) -> Result<Self> {
        if !self.is_constant() {
            return Err(Error::Unsupported(
                "trainable durations require constant waveforms".into(),
            ));
        }
        self.duration_var = Some(name.into());
        Ok(self)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.amplitude.kind, WaveformKind::Constant { .. })
            && matches!(self.detuning.kind, WaveformKind::Constant { .. })
    }

    pub fn duration_ns(&self) -> usize {
        self.amplitude.duration_ns
    }

    /// Names of every variable this pulse reads.
    pub fn variables(&self) -> Vec<&str> {
        let mut names = self.amplitude.variables();
        names.extend(self.detuning.variables());
        names.extend(self.phase.var_name());
        names.extend(self.duration_var.as_deref());
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_is_normalized() {
        let p = Pulse::constant(10, 1.0, 0.0, -0.5).unwrap();
        match p.phase {
            Scalar::Value(x) => assert!((x - (TAU - 0.5)).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert_eq!(normalize_phase(TAU), 0.0);
        assert_eq!(normalize_phase(-1e-300), 0.0);
    }

    #[test]
    fn durations_must_agree() {
        let a = WaveformSpec::constant(10, 1.0).unwrap();
        let d = WaveformSpec::constant(12, 0.0).unwrap();
        assert!(Pulse::new(a, d, 0.0).is_err());
    }

    #[test]
    fn duration_var_needs_constant_pulse() {
        let a = WaveformSpec::ramp(10, 0.0, 1.0).unwrap();
        let d = WaveformSpec::constant(10, 0.0).unwrap();
        let p = Pulse::new(a, d, 0.0).unwrap();
        assert!(p.with_duration_var("t").is_err());
        let p = Pulse::constant(10, "omega", 0.0, 0.0).unwrap();
        let p = p.with_duration_var("t").unwrap();
        assert_eq!(p.variables(), vec!["omega", "t"]);
    }
}
