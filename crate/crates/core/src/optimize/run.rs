// SPDX-License-Identifier: Apache-2.0

//! The training loop, its per-epoch log and resumable state.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, OptimizerState};
use super::model::QuantumModel;
use super::scheduler::{SchedulerConfig, SchedulerState};
use crate::domain::params::{clamp_to_constraints, ParameterSet};
use crate::error::{Error, Result};

/// Default early-stop threshold on the loss.
pub const DEFAULT_LOSS_BREAK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub epochs: usize,
    pub loss_break: f64,
    pub adam: AdamConfig,
    pub scheduler: SchedulerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            loss_break: DEFAULT_LOSS_BREAK,
            adam: AdamConfig::default(),
            scheduler: SchedulerConfig::default(),
        }
    }
}

/// One epoch of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Learning rate used for this epoch's update.
    pub lr: f64,
    pub restarted: bool,
    /// Values that produced `loss`.
    pub evaluated: BTreeMap<String, Vec<f64>>,
    /// Values after the update and clamp.
    pub params: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
}

/// The best-loss parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub params: BTreeMap<String, Vec<f64>>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Lowest-loss record; the first one wins ties.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .reduce(|best, r| if r.loss < best.loss { r } else { best })
    }

    /// Best parameters as a full set, using `template` for kinds and flags.
    pub fn best_params(&self, template: &ParameterSet) -> Result<Option<ParameterSet>> {
        let Some(best) = self.best() else { return Ok(None) };
        let mut out = template.clone();
        for (name, v) in &best.evaluated {
            out.set_value(name, v)?;
        }
        Ok(Some(out))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { records })
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub next_epoch: usize,
    pub params: ParameterSet,
    pub optimizer: OptimizerState,
    pub scheduler: SchedulerState,
    pub log: RunLog,
}

impl RunState {
    pub fn new(params: ParameterSet, cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            next_epoch: 0,
            params: clamp_to_constraints(&params)?,
            optimizer: OptimizerState::new(cfg.adam)?,
            scheduler: SchedulerState::new(cfg.scheduler, cfg.adam.lr)?,
            log: RunLog::default(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopReason {
    Converged { epoch: usize },
    EpochsExhausted,
    /// Non-finite loss or gradient; the state holds the offending parameters.
    Aborted { epoch: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: RunState,
    pub stop: StopReason,
}

impl RunOutcome {
    pub fn log(&self) -> &RunLog {
        &self.state.log
    }
}

/// Runs the loop from the model's current parameters.
pub fn run_optimization(model: &mut QuantumModel, cfg: &RunConfig) -> Result<RunOutcome> {
    let state = RunState::new(model.params().clone(), cfg)?;
    continue_optimization(model, cfg, state, &mut |_| Ok(()))
}

/// Runs epochs `state.next_epoch..cfg.epochs`: forward, backward, Adam,
/// clamp, sequence rebuild, scheduler, log. `on_epoch` sees the state after
/// every epoch, e.g. to write checkpoints.
pub fn continue_optimization(
    model: &mut QuantumModel,
    cfg: &RunConfig,
    mut state: RunState,
    on_epoch: &mut dyn FnMut(&RunState) -> Result<()>,
) -> Result<RunOutcome> {
    if !(cfg.loss_break >= 0.0) {
        return Err(Error::invalid("loss_break", "must be non-negative"));
    }
    model.update_sequence(&state.params)?;
    let mut losses = state.log.losses();
    for epoch in state.next_epoch..cfg.epochs {
        let evaluated = state.params.clone();
        let eval = match model.evaluate(&evaluated, None) {
            Ok(e) => e,
            Err(Error::NonFinite(what)) => {
                return Ok(RunOutcome {
                    state,
                    stop: StopReason::Aborted {
                        epoch,
                        reason: format!("non-finite {what}"),
                    },
                })
            }
            Err(e) => return Err(e),
        };
        let lr = state.optimizer.lr;
        state.optimizer.step(&eval.grads, &mut state.params)?;
        state.params = clamp_to_constraints(&state.params)?;
        model.update_sequence(&state.params)?;
        losses.push(eval.loss);
        let (next_lr, restarted) = state.scheduler.step(&losses);
        state.optimizer.lr = next_lr;
        state.log.records.push(EpochRecord {
            epoch,
            loss: eval.loss,
            lr,
            restarted,
            evaluated: evaluated.values(),
            params: state.params.values(),
        });
        state.next_epoch = epoch + 1;
        on_epoch(&state)?;
        if eval.loss < cfg.loss_break {
            return Ok(RunOutcome {
                state,
                stop: StopReason::Converged { epoch },
            });
        }
    }
    Ok(RunOutcome {
        state,
        stop: StopReason::EpochsExhausted,
    })
}
