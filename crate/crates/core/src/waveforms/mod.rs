// SPDX-License-Identifier: Apache-2.0

//! Waveform shapes, sine interpolation of bounded controls, smooth duration
//! envelopes and sampling of whole sequences onto the 1 ns grid.

pub mod drive;
pub mod envelope;
pub mod interpolation;
pub mod shapes;
pub mod transforms;

pub use drive::{
    phase_table, pulse_durations_us, sample_sequence, sample_smooth, write_phase_table_csv,
    DiscretizedDrive, PhaseEntry,
};
pub use envelope::{envelope, envelope_vjp, grid_len, EdgeProfile};
pub use interpolation::{sine_transition, InterpolationMatrix};
pub use shapes::{blackman_window, ramp_weights, sample_waveform, WaveformKind, WaveformSpec, SAMPLE_DT_US};
pub use transforms::{
    transform_amplitude_controls, transform_detuning_controls, ControlTransform, DEFAULT_GAMMA,
};
