// SPDX-License-Identifier: Apache-2.0

//! A reverse-mode tape over real vectors.
//!
//! Every node holds a flat `Vec<f64>`; complex quantities are stored as
//! interleaved `(re, im)` pairs and their adjoints follow the same layout,
//! i.e. `∂L/∂re + i ∂L/∂im`. Nodes are appended in evaluation order, so a
//! reverse sweep over indices is a valid topological order.

use std::collections::BTreeMap;

use crate::domain::params::ParameterSet;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Local vector-Jacobian product of one recorded operation.
pub trait BackwardOp: Send + Sync {
    /// Adds `Jᵀ·grad_out` for every input to `grads`.
    fn backward(&self, inputs: &[&[f64]], output: &[f64], grad_out: &[f64], grads: &mut [Vec<f64>]) -> Result<()>;
}

/// A linear map `y = A x` given by its action and its transpose.
pub trait LinearMap: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, g: &[f64]) -> Vec<f64>;
}

struct Node {
    value: Vec<f64>,
    inputs: Vec<Var>,
    op: Option<Box<dyn BackwardOp>>,
}

struct Leaf {
    name: String,
    var: Var,
}

/// Gradients of a scalar loss keyed by parameter name.
pub type GradientMap = BTreeMap<String, Vec<f64>>;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Vec<f64>, inputs: Vec<Var>, op: Option<Box<dyn BackwardOp>>) -> Var {
        self.nodes.push(Node { value, inputs, op });
        Var(self.nodes.len() - 1)
    }

    /// A trainable input whose gradient is reported under `name`.
    pub fn leaf(&mut self, name: impl Into<String>, value: Vec<f64>) -> Result<Var> {
        let name = name.into();
        if self.leaves.iter().any(|l| l.name == name) {
            return Err(Error::DuplicateVariable(name));
        }
        let var = self.push(value, Vec::new(), None);
        self.leaves.push(Leaf { name, var });
        Ok(var)
    }

    /// A value that does not receive a gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Vec::new(), None)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(vec![x])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Records a custom operation.
    pub fn custom(&mut self, inputs: &[Var], value: Vec<f64>, op: Box<dyn BackwardOp>) -> Var {
        self.push(value, inputs.to_vec(), Some(op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.custom(&[a, b], value, Box::new(AddOp { sign: 1.0 })))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.custom(&[a, b], value, Box::new(AddOp { sign: -1.0 })))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.custom(&[a, b], value, Box::new(MulOp)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).iter().map(|x| s * x).collect();
        self.custom(&[a], value, Box::new(ScaleOp(s)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = vec![self.value(a).iter().sum()];
        self.custom(&[a], value, Box::new(SumOp))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// Elementwise `f`, where `f` returns the value and its derivative.
    pub fn map(&mut self, a: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let (value, deriv): (Vec<f64>, Vec<f64>) = self.value(a).iter().map(|&x| f(x)).unzip();
        self.custom(&[a], value, Box::new(MapOp { deriv }))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| (x * x, 2.0 * x))
    }

    /// Repeats a length-1 value `n` times.
    pub fn broadcast(&mut self, a: Var, n: usize) -> Result<Var> {
        if self.len(a) != 1 {
            return Err(Error::ShapeMismatch {
                name: "broadcast input".into(),
                expected: 1,
                got: self.len(a),
            });
        }
        let value = vec![self.value(a)[0]; n];
        Ok(self.custom(&[a], value, Box::new(BroadcastOp)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().flat_map(|&p| self.value(p).to_vec()).collect();
        let lens = parts.iter().map(|&p| self.len(p)).collect();
        self.custom(parts, value, Box::new(ConcatOp { lens }))
    }

    /// `value[start..start+len]`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        if start + len > self.len(a) {
            return Err(Error::IndexOutOfRange {
                index: start + len,
                len: self.len(a),
            });
        }
        let value = self.value(a)[start..start + len].to_vec();
        Ok(self.custom(&[a], value, Box::new(SliceOp { start })))
    }

    pub fn linear(&mut self, a: Var, map: Box<dyn LinearMap>) -> Result<Var> {
        if map.input_len() != self.len(a) {
            return Err(Error::ShapeMismatch {
                name: "linear map input".into(),
                expected: map.input_len(),
                got: self.len(a),
            });
        }
        let value = map.apply(self.value(a));
        Ok(self.custom(&[a], value, Box::new(LinearOp(map))))
    }

    fn check_same_len(&self, a: Var, b: Var) -> Result<()> {
        if self.len(a) != self.len(b) {
            return Err(Error::ShapeMismatch {
                name: "elementwise operands".into(),
                expected: self.len(a),
                got: self.len(b),
            });
        }
        Ok(())
    }

    /// Gradient of the scalar `loss` with respect to every leaf.
    ///
    /// The tape is not modified, so calling this again yields the same result.
    /// Leaves that do not influence `loss` get an all-zero gradient.
    pub fn backward(&self, loss: Var) -> Result<GradientMap> {
        if self.len(loss) != 1 {
            return Err(Error::ShapeMismatch {
                name: "loss".into(),
                expected: 1,
                got: self.len(loss),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if let Some(op) = &node.op {
                let inputs: Vec<&[f64]> = node.inputs.iter().map(|v| self.value(*v)).collect();
                let mut local: Vec<Vec<f64>> = inputs.iter().map(|x| vec![0.0; x.len()]).collect();
                op.backward(&inputs, &node.value, &g, &mut local)?;
                for (v, lg) in node.inputs.iter().zip(local) {
                    match &mut grads[v.0] {
                        Some(acc) => acc.iter_mut().zip(&lg).for_each(|(a, b)| *a += b),
                        slot @ None => *slot = Some(lg),
                    }
                }
            }
            grads[idx] = Some(g);
        }
        let mut out = GradientMap::new();
        for leaf in &self.leaves {
            let g = match grads.get(leaf.var.0).and_then(|g| g.clone()) {
                Some(g) => g,
                None => vec![0.0; self.len(leaf.var)],
            };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`", leaf.name)));
            }
            out.insert(leaf.name.clone(), g);
        }
        Ok(out)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

/// Tape variables for every entry of a [`ParameterSet`]: trainable entries
/// become leaves, frozen ones constants.
#[derive(Debug, Clone, Default)]
pub struct ParamVars {
    vars: BTreeMap<String, Var>,
}

impl ParamVars {
    pub fn register(tape: &mut Tape, params: &ParameterSet) -> Result<Self> {
        let mut vars = BTreeMap::new();
        for (name, p) in params.iter() {
            let value = p.value.as_slice().to_vec();
            let v = if p.trainable {
                tape.leaf(name, value)?
            } else {
                tape.constant(value)
            };
            vars.insert(name.to_string(), v);
        }
        Ok(Self { vars })
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnboundParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }
}

struct AddOp {
    sign: f64,
}

impl BackwardOp for AddOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        for (i, gi) in g.iter().enumerate() {
            grads[0][i] += gi;
            grads[1][i] += self.sign * gi;
        }
        Ok(())
    }
}

struct MulOp;

impl BackwardOp for MulOp {
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        for (i, gi) in g.iter().enumerate() {
            grads[0][i] += gi * x[1][i];
            grads[1][i] += gi * x[0][i];
        }
        Ok(())
    }
}

struct ScaleOp(f64);

impl BackwardOp for ScaleOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        grads[0].iter_mut().zip(g).for_each(|(a, gi)| *a += self.0 * gi);
        Ok(())
    }
}

struct SumOp;

impl BackwardOp for SumOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        grads[0].iter_mut().for_each(|a| *a += g[0]);
        Ok(())
    }
}

struct MapOp {
    deriv: Vec<f64>,
}

impl BackwardOp for MapOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        for ((a, gi), d) in grads[0].iter_mut().zip(g).zip(&self.deriv) {
            *a += gi * d;
        }
        Ok(())
    }
}

struct BroadcastOp;

impl BackwardOp for BroadcastOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        grads[0][0] += g.iter().sum::<f64>();
        Ok(())
    }
}

struct ConcatOp {
    lens: Vec<usize>,
}

impl BackwardOp for ConcatOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let mut offset = 0;
        for (gi, &n) in grads.iter_mut().zip(&self.lens) {
            gi.iter_mut().zip(&g[offset..offset + n]).for_each(|(a, b)| *a += b);
            offset += n;
        }
        Ok(())
    }
}

struct SliceOp {
    start: usize,
}

impl BackwardOp for SliceOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        grads[0][self.start..self.start + g.len()]
            .iter_mut()
            .zip(g)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }
}

struct LinearOp(Box<dyn LinearMap>);

impl BackwardOp for LinearOp {
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], grads: &mut [Vec<f64>]) -> Result<()> {
        let t = self.0.apply_transpose(g);
        grads[0].iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        Ok(())
    }
}
