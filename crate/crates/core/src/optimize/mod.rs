// SPDX-License-Identifier: Apache-2.0

//! Adam, cosine annealing with plateau restarts, and the training loop over
//! a [`QuantumModel`].

pub mod adam;
pub mod model;
pub mod run;
pub mod scheduler;

pub use crate::autograd::losses::mse_loss;
pub use adam::{AdamConfig, OptimizerState};
pub use model::{reparameterize_duration, Evaluation, Frozen, FrozenLoss, Objective, QuantumModel};
pub use run::{
    continue_optimization, run_optimization, BestParams, EpochRecord, RunConfig, RunLog, RunOutcome, RunState,
    StopReason, DEFAULT_LOSS_BREAK,
};
pub use scheduler::{plateau, SchedulerConfig, SchedulerState};
