// SPDX-License-Identifier: Apache-2.0

//! Explicit Runge–Kutta propagation of `i dψ/dt = H(t) ψ` with `H` held
//! constant over every 1 ns sample.
//!
//! Time runs in ns while `H` is in rad/µs, so the generator is `−i·10⁻³·H`.
//! The adaptive Dormand–Prince 5(4) path records every accepted step size;
//! replaying that [`StepSchedule`] reproduces the forward pass bit for bit
//! and is what gradient computations differentiate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{DriveCoefficients, HamiltonianProgram, IsingOperator};
use super::state::StateBatch;
use crate::error::{Error, Result};

/// rad/µs · ns → rad.
pub const NS_SCALE: f64 = 1e-3;

/// Input states must have unit norm within this tolerance.
pub const INPUT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Dp5Adaptive,
    Rk4Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub atol: f64,
    pub rtol: f64,
    /// Equal substeps per 1 ns interval for the fixed-step solver.
    pub rk4_substeps: usize,
    /// Upper bound on attempted steps inside one interval.
    pub max_substeps: usize,
    /// Store the state every this many ns (initial and final states are always kept).
    pub store_every: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Dp5Adaptive,
            atol: 1e-8,
            rtol: 1e-6,
            rk4_substeps: 4,
            max_substeps: 100_000,
            store_every: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) || !(self.rtol >= 0.0) {
            return Err(Error::invalid("solver", "tolerances must be positive"));
        }
        if self.rk4_substeps == 0 || self.max_substeps == 0 {
            return Err(Error::invalid("solver", "step counts must be at least 1"));
        }
        if self.store_every == Some(0) {
            return Err(Error::invalid("store_every", "must be at least 1 ns"));
        }
        Ok(())
    }
}

/// Accepted step sizes (ns) of every 1 ns interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    kind: SolverKind,
    offsets: Vec<usize>,
    steps: Vec<f64>,
}

impl StepSchedule {
    fn empty(kind: SolverKind) -> Self {
        Self {
            kind,
            offsets: vec![0],
            steps: Vec::new(),
        }
    }

    pub fn uniform(kind: SolverKind, intervals: usize, substeps: usize) -> Self {
        let mut s = Self::empty(kind);
        let h = 1.0 / substeps as f64;
        for _ in 0..intervals {
            s.push_interval(std::iter::repeat(h).take(substeps));
        }
        s
    }

    pub(crate) fn from_intervals(kind: SolverKind, intervals: Vec<Vec<f64>>) -> Self {
        let mut s = Self::empty(kind);
        for iv in intervals {
            s.push_interval(iv);
        }
        s
    }

    fn push_interval(&mut self, steps: impl IntoIterator<Item = f64>) {
        self.steps.extend(steps);
        self.offsets.push(self.steps.len());
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// Number of 1 ns intervals covered.
    pub fn intervals(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn interval(&self, k: usize) -> &[f64] {
        &self.steps[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Butcher tableau of an explicit method with at most 7 stages.
pub(crate) struct Tableau {
    pub stages: usize,
    pub a: [[f64; 7]; 7],
    pub b: [f64; 7],
}

/// Dormand–Prince 5th-order solution; the seventh (FSAL) stage has zero weight.
pub(crate) const DP5: Tableau = Tableau {
    stages: 6,
    a: [
        [0.0; 7],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
            0.0,
        ],
        [0.0; 7],
    ],
    b: [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
};

/// `b − b̂` of the embedded 4th-order pair.
const DP5_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) const RK4: Tableau = Tableau {
    stages: 4,
    a: [
        [0.0; 7],
        [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0; 7],
        [0.0; 7],
        [0.0; 7],
    ],
    b: [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 0.0, 0.0, 0.0],
};

pub(crate) fn tableau(kind: SolverKind) -> &'static Tableau {
    match kind {
        SolverKind::Dp5Adaptive => &DP5,
        SolverKind::Rk4Fixed => &RK4,
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Scratch buffers and the operator for stepping one batch.
pub(crate) struct Stepper<'a> {
    pub op: &'a IsingOperator,
    pub dim: usize,
    /// Stage derivatives `k_i`.
    pub k: Vec<Vec<Complex64>>,
    /// Stage inputs `Y_i`.
    pub ys: Vec<Vec<Complex64>>,
    ynew: Vec<Complex64>,
    fsal: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(op: &'a IsingOperator, len: usize) -> Self {
        Self {
            op,
            dim: op.dim(),
            k: vec![vec![ZERO; len]; 7],
            ys: vec![vec![ZERO; len]; 7],
            ynew: vec![ZERO; len],
            fsal: vec![ZERO; len],
        }
    }

    /// `out = f(y)` for every column.
    pub fn eval(&self, c: &DriveCoefficients, y: &[Complex64], out: &mut [Complex64]) {
        for (yc, oc) in y.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            self.op.apply_generator(c, NS_SCALE, yc, oc);
        }
    }

    /// `out = i·10⁻³·H·v` per column, the adjoint of [`Self::eval`].
    pub fn eval_adjoint(&self, c: &DriveCoefficients, v: &[Complex64], out: &mut [Complex64]) {
        for (vc, oc) in v.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            self.op.apply_generator(c, -NS_SCALE, vc, oc);
        }
    }

    /// Computes all stages of one step from `y`; the first stage is taken
    /// from `first` when given. Leaves `y + h Σ b_i k_i` in `ynew`.
    fn stages(&mut self, tab: &Tableau, c: &DriveCoefficients, y: &[Complex64], h: f64, first: Option<&[Complex64]>) {
        for i in 0..tab.stages {
            let mut yi = std::mem::take(&mut self.ys[i]);
            yi.copy_from_slice(y);
            for l in 0..i {
                let a = h * tab.a[i][l];
                if a != 0.0 {
                    for (v, kl) in yi.iter_mut().zip(&self.k[l]) {
                        *v += kl * a;
                    }
                }
            }
            let mut ki = std::mem::take(&mut self.k[i]);
            match (i, first) {
                (0, Some(f)) => ki.copy_from_slice(f),
                _ => self.eval(c, &yi, &mut ki),
            }
            self.k[i] = ki;
            self.ys[i] = yi;
        }
        self.ynew.copy_from_slice(y);
        for i in 0..tab.stages {
            let w = h * tab.b[i];
            if w != 0.0 {
                for (v, ki) in self.ynew.iter_mut().zip(&self.k[i]) {
                    *v += ki * w;
                }
            }
        }
    }

    /// One step of `tab` with stage data left in `k`/`ys`.
    pub fn step(&mut self, tab: &Tableau, c: &DriveCoefficients, y: &mut [Complex64], h: f64) {
        self.stages(tab, c, y, h, None);
        y.copy_from_slice(&self.ynew);
    }

    /// Advances `y` across one interval with the given steps.
    pub fn fixed_interval(&mut self, tab: &Tableau, c: &DriveCoefficients, y: &mut [Complex64], steps: &[f64]) {
        for &h in steps {
            self.step(tab, c, y, h);
        }
    }

    /// Adaptive Dormand–Prince across one interval. `h` carries the proposed
    /// step size between intervals; accepted steps are appended to `accepted`.
    #[allow(clippy::too_many_arguments)]
    pub fn adaptive_interval(
        &mut self,
        c: &DriveCoefficients,
        y: &mut [Complex64],
        h: &mut f64,
        opts: &SolverOptions,
        accepted: &mut Vec<f64>,
        t_ns: usize,
    ) -> Result<()> {
        let mut pos = 0.0;
        let mut attempts = 0;
        let mut have_fsal = false;
        loop {
            let remaining = 1.0 - pos;
            let last = *h >= remaining - 1e-12;
            let step = if last { remaining } else { *h };
            let first = if have_fsal {
                Some(std::mem::take(&mut self.fsal))
            } else {
                None
            };
            self.stages(&DP5, c, y, step, first.as_deref());
            if let Some(f) = first {
                self.fsal = f;
            }
            // seventh stage: f(y_new), reused as the next first stage
            let mut k7 = std::mem::take(&mut self.k[6]);
            self.eval(c, &self.ynew, &mut k7);
            self.k[6] = k7;
            let err = self.error_norm(y, step, opts);
            attempts += 1;
            if !err.is_finite() {
                return Err(Error::NonFinite(format!("solver state at t = {t_ns} ns")));
            }
            if err <= 1.0 {
                y.copy_from_slice(&self.ynew);
                self.fsal.copy_from_slice(&self.k[6]);
                have_fsal = true;
                accepted.push(step);
                pos += step;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a truncated final step says nothing about the natural step size
                if !last || step >= *h {
                    *h = (step * factor).min(1.0);
                }
                if last {
                    return Ok(());
                }
            } else {
                *h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if attempts >= opts.max_substeps || *h < 1e-10 {
                return Err(Error::ToleranceFailure { t_ns });
            }
        }
    }

    /// Hairer's RMS norm of the embedded error estimate.
    fn error_norm(&self, y: &[Complex64], h: f64, opts: &SolverOptions) -> f64 {
        let mut acc = 0.0;
        for idx in 0..y.len() {
            let mut e = ZERO;
            for (i, w) in DP5_ERR.iter().enumerate() {
                if *w != 0.0 {
                    e += self.k[i][idx] * w;
                }
            }
            let e = h * e.norm();
            let sc = opts.atol + opts.rtol * y[idx].norm().max(self.ynew[idx].norm());
            acc += (e / sc).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }
}

/// Stored states of one propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// ns, strictly increasing from 0 to τ.
    pub times: Vec<f64>,
    pub states: Vec<StateBatch>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateBatch {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// `t_ns` followed by the basis-state probabilities of column `c`.
    pub fn write_populations_csv<W: std::io::Write>(&self, c: usize, mut out: W) -> Result<()> {
        let dim = self.states[0].dim();
        let width = dim.trailing_zeros() as usize;
        let header: Vec<String> = (0..dim).map(|b| format!("p_{b:0width$b}")).collect();
        writeln!(out, "t_ns,{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let probs: Vec<String> = s.probabilities(c).iter().map(|p| p.to_string()).collect();
            writeln!(out, "{t},{}", probs.join(","))?;
        }
        Ok(())
    }
}

/// A trajectory together with the steps that produced it.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub trajectory: Trajectory,
    pub schedule: StepSchedule,
}

impl Propagation {
    pub fn final_state(&self) -> &StateBatch {
        self.trajectory.final_state()
    }
}

fn check_initial(program: &HamiltonianProgram, initial: &StateBatch) -> Result<()> {
    if initial.dim() != program.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} for a {}-qubit program",
            initial.dim(),
            program.n_qubits()
        )));
    }
    initial.check_normalized(INPUT_NORM_TOL)
}

/// Solves the Schrödinger equation over the whole program.
pub fn propagate(program: &HamiltonianProgram, initial: &StateBatch, opts: &SolverOptions) -> Result<Propagation> {
    opts.validate()?;
    match opts.kind {
        SolverKind::Rk4Fixed => {
            let schedule = StepSchedule::uniform(SolverKind::Rk4Fixed, program.duration_ns(), opts.rk4_substeps);
            propagate_with_schedule(program, initial, &schedule, opts.store_every)
        }
        SolverKind::Dp5Adaptive => {
            check_initial(program, initial)?;
            let op = program.operator();
            let mut stepper = Stepper::new(&op, initial.data().len());
            let mut y = initial.data().to_vec();
            let mut store = Store::new(initial, opts.store_every);
            let mut schedule = StepSchedule::empty(SolverKind::Dp5Adaptive);
            let mut h = 1.0;
            let mut accepted = Vec::new();
            for k in 0..program.duration_ns() {
                let c = program.coefficients(k)?;
                accepted.clear();
                stepper.adaptive_interval(&c, &mut y, &mut h, opts, &mut accepted, k)?;
                schedule.push_interval(accepted.iter().copied());
                store.record(k + 1, program.duration_ns(), &y, initial)?;
            }
            Ok(Propagation {
                trajectory: store.finish(),
                schedule,
            })
        }
    }
}

/// Repeats a propagation with frozen step sizes.
pub fn propagate_with_schedule(
    program: &HamiltonianProgram,
    initial: &StateBatch,
    schedule: &StepSchedule,
    store_every: Option<usize>,
) -> Result<Propagation> {
    check_initial(program, initial)?;
    if schedule.intervals() != program.duration_ns() {
        return Err(Error::ScheduleMismatch(format!(
            "{} intervals recorded, program lasts {} ns",
            schedule.intervals(),
            program.duration_ns()
        )));
    }
    let op = program.operator();
    let tab = tableau(schedule.kind());
    let mut stepper = Stepper::new(&op, initial.data().len());
    let mut y = initial.data().to_vec();
    let mut store = Store::new(initial, store_every);
    for k in 0..program.duration_ns() {
        let c = program.coefficients(k)?;
        stepper.fixed_interval(tab, &c, &mut y, schedule.interval(k));
        store.record(k + 1, program.duration_ns(), &y, initial)?;
    }
    Ok(Propagation {
        trajectory: store.finish(),
        schedule: schedule.clone(),
    })
}

struct Store {
    every: Option<usize>,
    times: Vec<f64>,
    states: Vec<StateBatch>,
}

impl Store {
    fn new(initial: &StateBatch, every: Option<usize>) -> Self {
        Self {
            every,
            times: vec![0.0],
            states: vec![initial.clone()],
        }
    }

    fn record(&mut self, t: usize, tau: usize, y: &[Complex64], like: &StateBatch) -> Result<()> {
        let due = t == tau || self.every.is_some_and(|e| t % e == 0);
        if due {
            self.times.push(t as f64);
            self.states.push(StateBatch::from_data(like.dim(), like.cols(), y.to_vec())?);
        }
        Ok(())
    }

    fn finish(self) -> Trajectory {
        Trajectory {
            times: self.times,
            states: self.states,
        }
    }
}
