// SPDX-License-Identifier: Apache-2.0

//! Registers, device limits, pulses, sequences and the parameter registry.
//!
//! All types here are plain values: they are `Clone + Send + Sync` and
//! "mutation" happens by building new values.

pub mod device;
pub mod params;
pub mod pulse;
pub mod register;
pub mod sequence;

pub use device::{DeviceSpec, C6_RB_N60};
pub use params::{clamp_to_constraints, Constraint, ParamKind, ParamValue, Parameter, ParameterSet};
pub use pulse::{normalize_phase, Pulse, Scalar};
pub use register::{distance_matrix, Atom, Layout, Register};
pub use sequence::{Sequence, VarShape, DEFAULT_EDGE_STEEPNESS};
