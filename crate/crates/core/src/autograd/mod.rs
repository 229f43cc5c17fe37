// SPDX-License-Identifier: Apache-2.0

//! Reverse-mode differentiation of losses through sampling, interactions
//! and time propagation.

pub mod gradcheck;
pub mod losses;
pub mod propagation;
pub mod record;
pub mod tape;

pub use gradcheck::{
    grad_check, gradients_agree, DifferentiableLoss, FdSteps, GradCheckEntry, GradCheckReport, GraphLoss,
};
pub use losses::{expectation_value, mse, mse_loss, state_infidelity, unitary_infidelity};
pub use propagation::{pairs_to_matrix, record_propagation, PropagationNode};
pub use record::{record_drive, record_envelope, record_pair_interactions, record_pairs, RecordedDrive, SamplingPlan};
pub use tape::{BackwardOp, GradientMap, LinearMap, ParamVars, Tape, Var};
