// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference checks of reverse-mode gradients.

use std::io::Write;

use super::tape::{GradientMap, ParamVars, Tape, Var};
use crate::domain::params::{ParamKind, ParameterSet};
use crate::error::{Error, Result};

/// Relative agreement required between analytic and numeric gradients.
pub const REL_TOL: f64 = 1e-4;
/// Absolute floor below which components are considered equal.
pub const ABS_FLOOR: f64 = 1e-7;

/// A scalar loss of a parameter set with a reverse-mode gradient.
pub trait DifferentiableLoss {
    fn loss(&self, params: &ParameterSet) -> Result<f64>;
    fn loss_and_grad(&self, params: &ParameterSet) -> Result<(f64, GradientMap)>;
}

/// Loss defined by a closure that records its graph on a fresh tape.
pub struct GraphLoss<F> {
    build: F,
}

impl<F> GraphLoss<F>
where
    F: Fn(&mut Tape, &ParamVars, &ParameterSet) -> Result<Var>,
{
    pub fn new(build: F) -> Self {
        Self { build }
    }

    fn record(&self, params: &ParameterSet) -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, params)?;
        let loss = (self.build)(&mut tape, &vars, params)?;
        if tape.len(loss) != 1 {
            return Err(Error::ShapeMismatch {
                name: "loss".into(),
                expected: 1,
                got: tape.len(loss),
            });
        }
        Ok((tape, loss))
    }
}

impl<F> DifferentiableLoss for GraphLoss<F>
where
    F: Fn(&mut Tape, &ParamVars, &ParameterSet) -> Result<Var>,
{
    fn loss(&self, params: &ParameterSet) -> Result<f64> {
        let (tape, loss) = self.record(params)?;
        Ok(tape.value(loss)[0])
    }

    fn loss_and_grad(&self, params: &ParameterSet) -> Result<(f64, GradientMap)> {
        let (tape, loss) = self.record(params)?;
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss)[0], grads))
    }
}

/// Finite-difference step per parameter kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub drive: f64,
    pub phase: f64,
    pub control: f64,
    pub coordinate: f64,
    pub duration: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            drive: ParamKind::Drive.default_fd_step(),
            phase: ParamKind::Phase.default_fd_step(),
            control: ParamKind::Control.default_fd_step(),
            coordinate: ParamKind::Coordinate.default_fd_step(),
            duration: ParamKind::Duration.default_fd_step(),
        }
    }
}

impl FdSteps {
    pub fn step(&self, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Drive => self.drive,
            ParamKind::Phase => self.phase,
            ParamKind::Control => self.control,
            ParamKind::Coordinate => self.coordinate,
            ParamKind::Duration => self.duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: String,
    pub component: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

impl GradCheckEntry {
    fn new(param: &str, component: usize, analytic: f64, numeric: f64) -> Self {
        let scale = analytic.abs().max(numeric.abs());
        let diff = (analytic - numeric).abs();
        Self {
            param: param.to_string(),
            component,
            analytic,
            numeric,
            rel_err: if scale > 0.0 { diff / scale } else { 0.0 },
        }
    }

    pub fn passed(&self) -> bool {
        gradients_agree(self.analytic, self.numeric)
    }
}

/// `|a − n| ≤ max(1e-4 · max(|a|, |n|), 1e-7)`.
pub fn gradients_agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= (REL_TOL * analytic.abs().max(numeric.abs())).max(ABS_FLOOR)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub loss: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(GradCheckEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_err).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "param,component,analytic,numeric,rel_err")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.6e}",
                e.param, e.component, e.analytic, e.numeric, e.rel_err
            )?;
        }
        Ok(())
    }
}

/// Compares the reverse-mode gradient with central differences for every
/// trainable scalar.
pub fn grad_check(loss: &dyn DifferentiableLoss, params: &ParameterSet, steps: &FdSteps) -> Result<GradCheckReport> {
    let (value, grads) = loss.loss_and_grad(params)?;
    let mut report = GradCheckReport {
        loss: value,
        entries: Vec::new(),
    };
    for (name, p) in params.trainable() {
        let h = steps.step(p.kind);
        let base = p.value.as_slice().to_vec();
        let analytic = grads
            .get(name)
            .ok_or_else(|| Error::UnboundParameter(name.to_string()))?;
        for i in 0..base.len() {
            let mut shifted = params.clone();
            let mut v = base.clone();
            v[i] = base[i] + h;
            shifted.set_value(name, &v)?;
            let plus = loss.loss(&shifted)?;
            v[i] = base[i] - h;
            shifted.set_value(name, &v)?;
            let minus = loss.loss(&shifted)?;
            let numeric = (plus - minus) / (2.0 * h);
            report.entries.push(GradCheckEntry::new(name, i, analytic[i], numeric));
        }
    }
    Ok(report)
}
