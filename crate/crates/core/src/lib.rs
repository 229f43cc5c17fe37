// SPDX-License-Identifier: Apache-2.0

//! Differentiable simulation and pulse optimization for Rydberg atom arrays.

pub mod autograd;
pub mod cli;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod optimize;
pub mod waveforms;

pub use error::{Error, Result};
