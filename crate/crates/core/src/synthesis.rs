//! Per-transducer drive computation for multi-focus frames.
//!
//! Phases follow the convention of [`crate::field::pressure_at`]: a transducer
//! driven with phase `φ` contributes `e^{j(k·d + φ)}` at distance `d`, so the
//! focusing phase is `φ = -k·d (mod 2π)`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Vec3};
use crate::par::{self, Execution};
use crate::stimulus::FociFrame;

/// Points closer than this to a transducer centre are treated as coincident.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthesisMode {
    /// Complex sum of the single-focus drives, normalised by the array-wide
    /// maximum magnitude.
    #[default]
    Superposition,
    /// Uniform amplitude with the per-focus phases summed inside one exponent.
    LiteralPhaseSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SynthesisOptions {
    pub mode: SynthesisMode,
    /// Round phases to 8 bits (256 steps per cycle), as hardware drivers do.
    pub quantize_phase: bool,
}

impl From<SynthesisMode> for SynthesisOptions {
    fn from(mode: SynthesisMode) -> Self {
        Self {
            mode,
            quantize_phase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveFrame {
    pub time: f64,
    /// In [0, 1].
    pub amplitudes: Vec<f64>,
    /// In [0, 2π).
    pub phases: Vec<f64>,
}

impl DriveFrame {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Complex drive `a·e^{jφ}` of transducer `i`.
    pub fn complex(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[i], self.phases[i])
    }

    /// Rebuild a frame from complex per-transducer drives. Magnitudes must
    /// already lie in [0, 1].
    pub fn from_complex(time: f64, drives: &[Complex64]) -> Self {
        Self {
            time,
            amplitudes: drives.iter().map(|c| c.norm()).collect(),
            phases: drives.iter().map(|c| wrap_phase(c.arg())).collect(),
        }
    }
}

/// Wrap an angle into [0, 2π).
pub fn wrap_phase(phase: f64) -> f64 {
    if (0.0..TAU).contains(&phase) {
        return phase;
    }
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn quantize(phase: f64) -> f64 {
    let steps = (phase / TAU * 256.0).round() as i64;
    steps.rem_euclid(256) as f64 * TAU / 256.0
}

/// Focusing phase for a transducer at `distance`, computed in cycles so whole
/// wavelengths cancel exactly.
fn focus_phase(distance: f64, wavelength: f64) -> f64 {
    let cycles = -distance / wavelength;
    // Same value as `rem_euclid(1.0)` (the subtraction is exact) without the fmod call.
    wrap_phase(TAU * (cycles - cycles.floor()))
}

fn distance_checked(geometry: &ArrayGeometry, index: usize, point: &Vec3) -> Result<f64> {
    let d = (point - geometry.poses()[index].position).norm();
    if d < COINCIDENCE_TOLERANCE {
        return Err(Error::Singularity {
            transducer: index,
            x: point.x,
            y: point.y,
            z: point.z,
        });
    }
    Ok(d)
}

pub fn phases_for_focus(geometry: &ArrayGeometry, focus: Vec3) -> Result<Vec<f64>> {
    let wavelength = geometry.medium().wavelength();
    (0..geometry.len())
        .map(|i| Ok(focus_phase(distance_checked(geometry, i, &focus)?, wavelength)))
        .collect()
}

pub fn drive_for_frame(
    geometry: &ArrayGeometry,
    frame: &FociFrame,
    mode: SynthesisMode,
) -> Result<DriveFrame> {
    drive_for_frame_with(geometry, frame, &mode.into())
}

pub fn drive_for_frame_with(
    geometry: &ArrayGeometry,
    frame: &FociFrame,
    options: &SynthesisOptions,
) -> Result<DriveFrame> {
    if frame.foci.is_empty() {
        return Err(Error::Argument("frame has no foci".into()));
    }
    if !(0.0..=1.0).contains(&frame.amplitude) {
        return Err(Error::Argument(format!(
            "frame amplitude must lie in [0, 1], got {}",
            frame.amplitude
        )));
    }
    let n = geometry.len();
    let (amplitudes, mut phases) = if frame.foci.len() == 1 {
        (
            vec![frame.amplitude; n],
            phases_for_focus(geometry, frame.foci[0])?,
        )
    } else {
        let wavelength = geometry.medium().wavelength();
        match options.mode {
            SynthesisMode::Superposition => {
                let mut sums = Vec::with_capacity(n);
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for focus in &frame.foci {
                        let phase = focus_phase(distance_checked(geometry, i, focus)?, wavelength);
                        let (s, c) = phase.sin_cos();
                        acc += Complex64::new(c, s);
                    }
                    sums.push(acc);
                }
                let max = sums.iter().map(|c| c.norm()).fold(0.0, f64::max);
                let amplitudes = if max > 0.0 {
                    sums.iter().map(|c| frame.amplitude * (c.norm() / max)).collect()
                } else {
                    vec![0.0; n]
                };
                let phases = sums.iter().map(|c| wrap_phase(c.arg())).collect();
                (amplitudes, phases)
            }
            SynthesisMode::LiteralPhaseSum => {
                let mut phases = Vec::with_capacity(n);
                for i in 0..n {
                    let mut total = 0.0;
                    for focus in &frame.foci {
                        total += focus_phase(distance_checked(geometry, i, focus)?, wavelength);
                    }
                    phases.push(wrap_phase(total));
                }
                (vec![frame.amplitude; n], phases)
            }
        }
    };
    if options.quantize_phase {
        phases.iter_mut().for_each(|p| *p = quantize(*p));
    }
    Ok(DriveFrame {
        time: frame.time,
        amplitudes,
        phases,
    })
}

pub fn stream_drive(
    geometry: &ArrayGeometry,
    frames: &[FociFrame],
    mode: SynthesisMode,
) -> Result<Vec<DriveFrame>> {
    stream_drive_with(geometry, frames, &mode.into(), Execution::default())
}

/// Drive frames for a time-ordered frame sequence; frames are synthesised
/// independently, so the output does not depend on `exec`.
pub fn stream_drive_with(
    geometry: &ArrayGeometry,
    frames: &[FociFrame],
    options: &SynthesisOptions,
    exec: Execution,
) -> Result<Vec<DriveFrame>> {
    for (i, w) in frames.windows(2).enumerate() {
        if !(w[1].time >= w[0].time) {
            return Err(Error::Ordering {
                index: i + 1,
                t: w[1].time,
                prev: w[0].time,
            });
        }
    }
    par::try_map_range(exec, frames.len(), |k| {
        drive_for_frame_with(geometry, &frames[k], options)
    })
}
