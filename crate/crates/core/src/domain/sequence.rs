// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::device::DeviceSpec;
use crate::domain::pulse::{Pulse, Scalar};
use crate::domain::register::Register;
use crate::error::{Error, Result};
use crate::waveforms::WaveformKind;

/// Declared shape of a sequence variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarShape {
    Scalar,
    Vector(usize),
}

impl VarShape {
    pub fn len(self) -> usize {
        match self {
            VarShape::Scalar => 1,
            VarShape::Vector(n) => n,
        }
    }
}

/// Default steepness of the smooth edges used when durations are trainable, 1/ns.
pub const DEFAULT_EDGE_STEEPNESS: f64 = 1.0;

/// A pulse program on a single global channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceDoc", into = "SequenceDoc")]
pub struct Sequence {
    register: Register,
    device: DeviceSpec,
    pulses: Vec<Pulse>,
    declared: BTreeMap<String, VarShape>,
    edge_steepness: f64,
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    register: Register,
    #[serde(default)]
    device: DeviceSpec,
    #[serde(default)]
    variables: BTreeMap<String, VarShape>,
    #[serde(default = "default_steepness")]
    edge_steepness: f64,
    #[serde(default)]
    pulses: Vec<Pulse>,
}

fn default_steepness() -> f64 {
    DEFAULT_EDGE_STEEPNESS
}

impl TryFrom<SequenceDoc> for Sequence {
    type Error = Error;

    fn try_from(doc: SequenceDoc) -> Result<Self> {
        let mut seq = Sequence::new(doc.register, doc.device)?;
        seq.declared = doc.variables;
        seq.set_edge_steepness(doc.edge_steepness)?;
        for p in doc.pulses {
            seq.add(p)?;
        }
        Ok(seq)
    }
}

impl From<Sequence> for SequenceDoc {
    fn from(s: Sequence) -> Self {
        SequenceDoc {
            register: s.register,
            device: s.device,
            variables: s.declared,
            edge_steepness: s.edge_steepness,
            pulses: s.pulses,
        }
    }
}

impl Sequence {
    pub fn new(register: Register, device: DeviceSpec) -> Result<Self> {
        device.validate()?;
        if let Some(d) = register.min_distance() {
            if d < device.min_atom_distance {
                return Err(Error::Register(format!(
                    "atoms {d:.3} µm apart, device minimum is {} µm",
                    device.min_atom_distance
                )));
            }
        }
        Ok(Self {
            register,
            device,
            pulses: Vec::new(),
            declared: BTreeMap::new(),
            edge_steepness: DEFAULT_EDGE_STEEPNESS,
        })
    }

    /// Declares a variable and returns a reference usable in waveforms.
    pub fn declare_variable(&mut self, name: impl Into<String>, shape: VarShape) -> Result<Scalar> {
        let name = name.into();
        if self.declared.contains_key(&name) || self.register.atom(&name).is_some() {
            return Err(Error::DuplicateVariable(name));
        }
        self.declared.insert(name.clone(), shape);
        Ok(Scalar::Var(name))
    }

    /// Appends a pulse after checking every variable it reads is declared.
    pub fn add(&mut self, pulse: Pulse) -> Result<()> {
        for name in pulse.variables() {
            if !self.declared.contains_key(name) {
                return Err(Error::UnboundParameter(name.to_string()));
            }
        }
        for wf in [&pulse.amplitude, &pulse.detuning] {
            if let WaveformKind::Custom { controls, n_controls, .. } = &wf.kind {
                let declared = self.declared[controls.as_str()].len();
                if declared != *n_controls {
                    return Err(Error::ShapeMismatch {
                        name: controls.clone(),
                        expected: *n_controls,
                        got: declared,
                    });
                }
            }
        }
        if pulse.duration_var.is_some() || self.has_trainable_durations() {
            let all_constant = self.pulses.iter().all(Pulse::is_constant) && pulse.is_constant();
            if !all_constant {
                return Err(Error::Unsupported(
                    "trainable durations require every pulse to be constant".into(),
                ));
            }
        }
        self.pulses.push(pulse);
        Ok(())
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn device(&self) -> &DeviceSpec {
        &self.device
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn declared_variables(&self) -> &BTreeMap<String, VarShape> {
        &self.declared
    }

    pub fn n_qubits(&self) -> usize {
        self.register.len()
    }

    /// Nominal total duration τ in ns.
    pub fn duration_ns(&self) -> usize {
        self.pulses.iter().map(Pulse::duration_ns).sum()
    }

    pub fn has_trainable_durations(&self) -> bool {
        self.pulses.iter().any(|p| p.duration_var.is_some())
    }

    pub fn edge_steepness(&self) -> f64 {
        self.edge_steepness
    }

    pub fn set_edge_steepness(&mut self, kappa: f64) -> Result<()> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("edge_steepness", "must be positive"));
        }
        self.edge_steepness = kappa;
        Ok(())
    }

    /// Replaces the register, keeping pulses (same atom count required).
    pub fn with_register(&self, register: Register) -> Result<Self> {
        if register.len() != self.register.len() {
            return Err(Error::DimensionMismatch(format!(
                "register has {} atoms, sequence uses {}",
                register.len(),
                self.register.len()
            )));
        }
        Ok(Self {
            register,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ns() < 1 {
            return Err(Error::invalid("sequence", "total duration must be at least 1 ns"));
        }
        Ok(())
    }
}
