// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction coefficient for the Rb n = 60 Rydberg level, rad·µm⁶/µs.
pub const C6_RB_N60: f64 = 865_723.02;

/// Hardware limits of the global Rydberg channel.
///
/// Drive amplitudes and detunings are angular frequencies in rad/µs (ħ = 1);
/// sequence times are integer nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceSpec {
    /// Ω_max, rad/µs.
    pub max_amp: f64,
    /// |δ_max|, rad/µs.
    pub max_abs_detuning: f64,
    /// C₆, rad·µm⁶/µs.
    pub c6: f64,
    /// µm.
    pub min_atom_distance: f64,
    /// Sampling period in ns. Only 1 is supported.
    pub sample_dt: u32,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            max_amp: 4.0 * PI,
            max_abs_detuning: 4.0 * PI,
            c6: C6_RB_N60,
            min_atom_distance: 4.0,
            sample_dt: 1,
        }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_amp > 0.0) {
            return Err(Error::invalid("max_amp", "must be positive"));
        }
        if !(self.max_abs_detuning > 0.0) {
            return Err(Error::invalid("max_abs_detuning", "must be positive"));
        }
        if !(self.c6 > 0.0) {
            return Err(Error::invalid("c6", "must be positive"));
        }
        if !(self.min_atom_distance >= 0.0) {
            return Err(Error::invalid("min_atom_distance", "must be non-negative"));
        }
        if self.sample_dt != 1 {
            return Err(Error::invalid("sample_dt", "only 1 ns sampling is supported"));
        }
        Ok(())
    }

    /// Van der Waals coupling C₆/r⁶ in rad/µs.
    pub fn interaction(&self, r: f64) -> f64 {
        self.c6 / r.powi(6)
    }
}
