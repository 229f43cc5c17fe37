// SPDX-License-Identifier: Apache-2.0

//! Hamiltonian construction, time propagation and figures of merit.

pub mod hamiltonian;
pub mod integrator;
pub mod measures;
pub mod state;

pub use hamiltonian::{
    build_hamiltonian_step, interaction_matrix, nn_interaction_ratio, qubit_mask, DriveCoefficients,
    HamiltonianProgram, IsingOperator, MAX_QUBITS,
};
pub use integrator::{
    propagate, propagate_with_schedule, Propagation, SolverKind, SolverOptions, StepSchedule, Trajectory,
    NS_SCALE,
};
pub use measures::{
    expectation, hadamard_target, hermitian_residual, reconstruct_unitary, rydberg_number, rydberg_projector,
    state_fidelity, trace_overlap, unitary_fidelity, MAX_UNITARY_QUBITS,
};
pub use state::{parse_bitstring, StateBatch};
