// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::envelope::{envelope, grid_len, EdgeProfile};
use super::shapes::{sample_waveform, WaveformKind};
use crate::domain::params::ParameterSet;
use crate::domain::pulse::{normalize_phase, Pulse};
use crate::domain::sequence::Sequence;
use crate::error::{Error, Result};

/// Per-nanosecond samples of one global channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedDrive {
    pub amp: Vec<f64>,
    pub det: Vec<f64>,
    pub phase: Vec<f64>,
}

impl DiscretizedDrive {
    pub fn new(amp: Vec<f64>, det: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if amp.len() != det.len() || amp.len() != phase.len() {
            return Err(Error::DimensionMismatch(format!(
                "drive lengths differ: amp {}, det {}, phase {}",
                amp.len(),
                det.len(),
                phase.len()
            )));
        }
        if amp.is_empty() {
            return Err(Error::invalid("drive", "must contain at least one sample"));
        }
        if let Some((k, a)) = amp.iter().enumerate().find(|(_, a)| !(**a >= 0.0)) {
            return Err(Error::invalid("amp", format!("sample {k} is {a}, must be non-negative")));
        }
        if amp.iter().chain(&det).chain(&phase).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("drive samples".into()));
        }
        Ok(Self { amp, det, phase })
    }

    /// Constant drive of `len` samples.
    pub fn constant(len: usize, amp: f64, det: f64, phase: f64) -> Result<Self> {
        Self::new(vec![amp; len], vec![det; len], vec![phase; len])
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::constant(len, 0.0, 0.0, 0.0)
    }

    /// Duration τ in ns.
    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp.is_empty()
    }

    /// Writes `t_ns,amp,det`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_ns,amp,det")?;
        for (k, (a, d)) in self.amp.iter().zip(&self.det).enumerate() {
            // `+ 0.0` prints negative zero as 0
            writeln!(out, "{k},{},{}", a + 0.0, d + 0.0)?;
        }
        Ok(())
    }
}

/// One row of the per-pulse phase table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub pulse: usize,
    pub start_ns: f64,
    pub end_ns: f64,
    pub phase: f64,
}

/// Start/end (ns) and phase of every pulse, honouring trainable durations.
pub fn phase_table(seq: &Sequence, params: &ParameterSet) -> Result<Vec<PhaseEntry>> {
    let durations = pulse_durations_us(seq, params)?;
    let mut t = 0.0;
    seq.pulses()
        .iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (p, d))| {
            let start = t;
            t += 1000.0 * d;
            Ok(PhaseEntry {
                pulse: i,
                start_ns: start,
                end_ns: t,
                phase: normalize_phase(p.phase.resolve(params)?),
            })
        })
        .collect()
}

pub fn write_phase_table_csv<W: Write>(table: &[PhaseEntry], mut out: W) -> Result<()> {
    writeln!(out, "pulse,start_ns,end_ns,phase")?;
    for e in table {
        writeln!(out, "{},{},{},{}", e.pulse, e.start_ns, e.end_ns, e.phase)?;
    }
    Ok(())
}

/// Duration of every pulse in µs: the bound duration variable if present,
/// the nominal integer length otherwise.
pub fn pulse_durations_us(seq: &Sequence, params: &ParameterSet) -> Result<Vec<f64>> {
    seq.pulses()
        .iter()
        .map(|p| match &p.duration_var {
            Some(name) => {
                let d = params.scalar(name)?;
                if !(d > 0.0) {
                    return Err(Error::invalid(name, format!("duration {d} µs must be positive")));
                }
                Ok(d)
            }
            None => Ok(p.duration_ns() as f64 * 1e-3),
        })
        .collect()
}

fn constant_level(p: &Pulse, params: &ParameterSet) -> Result<(f64, f64, f64)> {
    let value = |kind: &WaveformKind| match kind {
        WaveformKind::Constant { value } => value.resolve(params),
        _ => Err(Error::Unsupported(
            "trainable durations require constant waveforms".into(),
        )),
    };
    Ok((
        value(&p.amplitude.kind)?,
        value(&p.detuning.kind)?,
        normalize_phase(p.phase.resolve(params)?),
    ))
}

/// Samples every pulse on the 1 ns grid and concatenates them.
///
/// When any pulse carries a trainable duration the drive is the smooth
/// envelope over `ceil(1000 · Σ d)` slots instead of a plain concatenation.
pub fn sample_sequence(seq: &Sequence, params: &ParameterSet) -> Result<DiscretizedDrive> {
    seq.validate()?;
    if seq.has_trainable_durations() {
        let durations = pulse_durations_us(seq, params)?;
        return sample_smooth(seq, params, &durations, grid_len(&durations), EdgeProfile::default());
    }
    let tau = seq.duration_ns();
    let mut amp = Vec::with_capacity(tau);
    let mut det = Vec::with_capacity(tau);
    let mut phase = Vec::with_capacity(tau);
    for p in seq.pulses() {
        let a = sample_waveform(&p.amplitude, params)?;
        let d = sample_waveform(&p.detuning, params)?;
        assert_eq!(a.len(), d.len(), "pulse waveforms must share one duration");
        let phi = normalize_phase(p.phase.resolve(params)?);
        phase.extend(std::iter::repeat(phi).take(a.len()));
        amp.extend(a);
        det.extend(d);
    }
    DiscretizedDrive::new(amp, det, phase)
}

/// Smooth-envelope drive of `len` samples for explicit durations (µs).
pub fn sample_smooth(
    seq: &Sequence,
    params: &ParameterSet,
    durations_us: &[f64],
    len: usize,
    profile: EdgeProfile,
) -> Result<DiscretizedDrive> {
    let mut levels = (Vec::new(), Vec::new(), Vec::new());
    for p in seq.pulses() {
        let (a, d, f) = constant_level(p, params)?;
        levels.0.push(a);
        levels.1.push(d);
        levels.2.push(f);
    }
    let kappa = seq.edge_steepness();
    let env = |lv: &[f64]| envelope(lv, durations_us, kappa, profile, len);
    // erf differences can dip a rounding error below zero far from any pulse
    let amp = env(&levels.0).into_iter().map(|a| a.max(0.0)).collect();
    DiscretizedDrive::new(amp, env(&levels.1), env(&levels.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::params::{ParamKind, Parameter};
    use crate::domain::register::{Layout, Register};
    use crate::domain::sequence::VarShape;
    use crate::domain::DeviceSpec;
    use crate::waveforms::WaveformSpec;

    fn seq() -> Sequence {
        Sequence::new(Register::build(Layout::Linear, 8.0, 2).unwrap(), DeviceSpec::default()).unwrap()
    }

    #[test]
    fn toy_sequence_length() {
        let mut s = seq();
        let omega = s.declare_variable("omega", VarShape::Scalar).unwrap();
        s.add(Pulse::constant(1000, omega, 0.0, 0.0).unwrap()).unwrap();
        s.add(
            Pulse::new(
                WaveformSpec::blackman(800, 3.0).unwrap(),
                WaveformSpec::ramp(800, 5.0, 0.0).unwrap(),
                0.0,
            )
            .unwrap(),
        )
        .unwrap();
        let p = ParameterSet::new()
            .with("omega", Parameter::new(5.0, ParamKind::Drive))
            .unwrap();
        let d = sample_sequence(&s, &p).unwrap();
        assert_eq!(d.len(), 1800);
        assert_eq!(d.amp[0], 5.0);
        assert_eq!(d.det[1000], 5.0);
    }

    #[test]
    fn eight_constant_pulses() {
        let mut s = seq();
        let mut p = ParameterSet::new();
        for i in 0..8 {
            let name = format!("amp_{i}");
            s.declare_variable(&name, VarShape::Scalar).unwrap();
            p.insert(&name, Parameter::new(i as f64, ParamKind::Drive)).unwrap();
            s.add(Pulse::constant(131, name.as_str(), 0.0, 1.0).unwrap()).unwrap();
        }
        let d = sample_sequence(&s, &p).unwrap();
        assert_eq!(d.len(), 1048);
        let mut levels: Vec<f64> = d.amp.clone();
        levels.dedup();
        assert_eq!(levels.len(), 8);
        assert!(d.phase.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn zero_program() {
        let mut s = seq();
        s.add(Pulse::constant(50, 0.0, 0.0, 0.0).unwrap()).unwrap();
        let d = sample_sequence(&s, &ParameterSet::new()).unwrap();
        assert!(d.amp.iter().chain(&d.det).all(|&x| x == 0.0));
    }

    #[test]
    fn negative_amplitude_rejected() {
        assert!(DiscretizedDrive::constant(3, -1.0, 0.0, 0.0).is_err());
        assert!(DiscretizedDrive::new(vec![1.0; 3], vec![0.0; 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn trainable_duration_envelope() {
        let mut s = seq();
        s.declare_variable("omega", VarShape::Scalar).unwrap();
        s.declare_variable("t1", VarShape::Scalar).unwrap();
        s.add(
            Pulse::constant(400, "omega", 0.0, 0.0)
                .unwrap()
                .with_duration_var("t1")
                .unwrap(),
        )
        .unwrap();
        let p = ParameterSet::new()
            .with("omega", Parameter::new(3.0, ParamKind::Drive))
            .unwrap()
            .with("t1", Parameter::new(0.25, ParamKind::Duration))
            .unwrap();
        let d = sample_sequence(&s, &p).unwrap();
        assert_eq!(d.len(), 250);
        assert!((d.amp[125] - 3.0).abs() < 1e-9);
        let table = phase_table(&s, &p).unwrap();
        assert_eq!(table[0].end_ns, 250.0);
    }

    #[test]
    fn csv_export() {
        let d = DiscretizedDrive::constant(2, 1.5, -0.5, 0.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t_ns,amp,det\n0,1.5,-0.5\n1,1.5,-0.5\n");
    }
}
