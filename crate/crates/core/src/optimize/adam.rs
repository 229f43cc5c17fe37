// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autograd::GradientMap;
use crate::domain::params::ParameterSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("lr", "must be finite and non-negative"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(name, "must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps", "must be positive"));
        }
        Ok(())
    }
}

/// Adam moments per trainable parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    /// Current learning rate; the scheduler rewrites it between steps.
    pub lr: f64,
    pub t: u64,
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lr: config.lr,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        })
    }

    /// One bias-corrected Adam update of every trainable parameter that has a
    /// gradient. Constraints are not applied.
    pub fn step(&mut self, grads: &GradientMap, params: &mut ParameterSet) -> Result<()> {
        for (name, g) in grads {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (name, p) in params.iter_mut() {
            if !p.trainable {
                continue;
            }
            let Some(g) = grads.get(name) else { continue };
            let x = p.value.as_mut_slice();
            if g.len() != x.len() {
                return Err(Error::ShapeMismatch {
                    name: name.to_string(),
                    expected: x.len(),
                    got: g.len(),
                });
            }
            let m = self.m.entry(name.to_string()).or_insert_with(|| vec![0.0; x.len()]);
            let v = self.v.entry(name.to_string()).or_insert_with(|| vec![0.0; x.len()]);
            for i in 0..x.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                x[i] -= self.lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::params::{ParamKind, Parameter};

    fn params() -> ParameterSet {
        ParameterSet::new()
            .with("a", Parameter::new(vec![1.0, -2.0], ParamKind::Drive))
            .unwrap()
            .with("f", Parameter::fixed(3.0, ParamKind::Drive))
            .unwrap()
    }

    fn grads(a: [f64; 2]) -> GradientMap {
        GradientMap::from([("a".to_string(), a.to_vec())])
    }

    #[test]
    fn first_step_is_unit_update() {
        let mut p = params();
        let mut opt = OptimizerState::new(AdamConfig::with_lr(0.05)).unwrap();
        opt.step(&grads([1.0, -1.0]), &mut p).unwrap();
        let a = p.value("a").unwrap().as_slice();
        // m̂ = g, v̂ = g², so Δ = −lr · g / (|g| + ε)
        let step = 0.05 / (1.0 + 1e-8);
        assert!((a[0] - (1.0 - step)).abs() < 1e-15);
        assert!((a[1] - (-2.0 + step)).abs() < 1e-15);
        assert_eq!(p.scalar("f").unwrap(), 3.0);
    }

    #[test]
    fn matches_hand_rolled_reference() {
        let mut p = params();
        let mut opt = OptimizerState::new(AdamConfig::with_lr(0.1)).unwrap();
        let gs = [0.5, -1.5, 2.0, 0.25];
        let (mut m, mut v, mut x) = (0.0, 0.0, 1.0);
        for (t, g) in gs.iter().enumerate() {
            opt.step(&grads([*g, 0.0]), &mut p).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.value("a").unwrap().as_slice()[0] - x).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_and_zero_lr_leave_parameters() {
        let mut p = params();
        let mut opt = OptimizerState::new(AdamConfig::with_lr(0.05)).unwrap();
        for _ in 0..5 {
            opt.step(&grads([0.0, 0.0]), &mut p).unwrap();
        }
        assert_eq!(p, params());
        let mut opt = OptimizerState::new(AdamConfig::with_lr(0.0)).unwrap();
        opt.step(&grads([3.0, -7.0]), &mut p).unwrap();
        assert_eq!(p, params());
    }

    #[test]
    fn identical_inputs_identical_updates() {
        let (mut p, mut q) = (params(), params());
        let mut o1 = OptimizerState::new(AdamConfig::default()).unwrap();
        let mut o2 = o1.clone();
        for g in [[0.3, 1.0], [-0.2, 4.0]] {
            o1.step(&grads(g), &mut p).unwrap();
            o2.step(&grads(g), &mut q).unwrap();
        }
        assert_eq!(p, q);
        assert_eq!(o1, o2);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = params();
        let mut opt = OptimizerState::new(AdamConfig::default()).unwrap();
        assert!(matches!(
            opt.step(&grads([f64::NAN, 0.0]), &mut p),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(opt.t, 0);
    }
}
