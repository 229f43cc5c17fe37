// SPDX-License-Identifier: Apache-2.0

//! Gate and state-preparation problems and the table sweeps built on them.

pub mod builders;
pub mod config;
pub mod sweep;

pub use builders::{
    build_expectation_experiment, build_experiment, build_gate_const_experiment, build_gate_custom_experiment,
    build_state_prep_experiment, run_experiment, Experiment, ExperimentResult, AMP_CONTROLS, DET_CONTROLS,
};
pub use config::{ExperimentConfig, ExperimentKind, LayoutName, OptimizerSection, MAX_EXPERIMENT_QUBITS};
pub use sweep::{run_table_sweep, table_rows, RowResult, SeedRun, SweepOptions, SweepResult, TableId, TableRow};
