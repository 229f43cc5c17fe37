// SPDX-License-Identifier: Apache-2.0

//! Named differentiable parameters with optional box constraints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar or vector parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    pub fn len(&self) -> usize {
        match self {
            ParamValue::Scalar(_) => 1,
            ParamValue::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            ParamValue::Scalar(x) => std::slice::from_ref(x),
            ParamValue::Vector(v) => v,
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            ParamValue::Scalar(x) => std::slice::from_mut(x),
            ParamValue::Vector(v) => v,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            ParamValue::Scalar(x) => Some(*x),
            ParamValue::Vector(_) => None,
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Scalar(x)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::Vector(v)
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub min: f64,
    pub max: f64,
}

impl Constraint {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.min..=self.max).contains(&x)
    }
}

/// What a parameter physically controls. Selects the finite-difference step
/// used by gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Amplitude, detuning, area or similar rad/µs-scale quantity.
    #[default]
    Drive,
    Phase,
    /// Unbounded waveform control values fed through a squashing transform.
    Control,
    /// Atom coordinates, µm.
    Coordinate,
    /// Pulse durations, µs.
    Duration,
}

impl ParamKind {
    pub fn default_fd_step(self) -> f64 {
        match self {
            ParamKind::Drive | ParamKind::Phase | ParamKind::Control => 1e-4,
            ParamKind::Coordinate => 1e-3,
            ParamKind::Duration => 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: ParamValue,
    #[serde(default = "default_true")]
    pub trainable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
    #[serde(default)]
    pub kind: ParamKind,
}

fn default_true() -> bool {
    true
}

impl Parameter {
    pub fn new(value: impl Into<ParamValue>, kind: ParamKind) -> Self {
        Self {
            value: value.into(),
            trainable: true,
            constraint: None,
            kind,
        }
    }

    pub fn fixed(value: impl Into<ParamValue>, kind: ParamKind) -> Self {
        Self {
            trainable: false,
            ..Self::new(value, kind)
        }
    }

    pub fn constrained(mut self, min: f64, max: f64) -> Self {
        self.constraint = Some(Constraint::new(min, max));
        self
    }
}

/// Registry of named parameters, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterSet {
    entries: BTreeMap<String, Parameter>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a new parameter; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, param: Parameter) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        self.entries.insert(name, param);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, param: Parameter) -> Result<Self> {
        self.insert(name, param)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.entries.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&ParamValue> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::UnboundParameter(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let v = self.value(name)?;
        v.scalar().ok_or_else(|| Error::ShapeMismatch {
            name: name.to_string(),
            expected: 1,
            got: v.len(),
        })
    }

    /// Overwrites the value of an existing parameter, checking its length.
    pub fn set_value(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnboundParameter(name.to_string()))?;
        if p.value.len() != values.len() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: p.value.len(),
                got: values.len(),
            });
        }
        p.value.as_mut_slice().copy_from_slice(values);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn trainable(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.iter().filter(|(_, p)| p.trainable)
    }

    /// Number of trainable scalar components.
    pub fn n_trainable_scalars(&self) -> usize {
        self.trainable().map(|(_, p)| p.value.len()).sum()
    }

    /// Sets every parameter's trainable flag.
    pub fn freeze_all(&mut self) {
        for p in self.entries.values_mut() {
            p.trainable = false;
        }
    }

    /// Plain name → values snapshot.
    pub fn values(&self) -> BTreeMap<String, Vec<f64>> {
        self.entries
            .iter()
            .map(|(k, p)| (k.clone(), p.value.as_slice().to_vec()))
            .collect()
    }
}

/// Projects every constrained entry onto its interval, componentwise.
pub fn clamp_to_constraints(params: &ParameterSet) -> Result<ParameterSet> {
    let mut out = params.clone();
    for (name, p) in out.iter_mut() {
        if let Some(c) = p.constraint {
            if c.min > c.max || c.min.is_nan() || c.max.is_nan() {
                return Err(Error::InvalidConstraint(name.to_string()));
            }
            for x in p.value.as_mut_slice() {
                *x = x.clamp(c.min, c.max);
            }
        }
    }
    Ok(out)
}
