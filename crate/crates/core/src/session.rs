//! Simulated interaction loop: contact tracking at a slow rate, foci updates at
//! the frame rate, and persistence of the resulting drive stream.
//!
//! Time is logical throughout. Tracking ticks sit at `m / tracking_rate` and
//! frames at `k / frame_rate`; each frame uses the stimulus centre fixed at the
//! most recent tick, and frames are only produced while that tick reports
//! contact. The stimulus clock restarts at every contact onset.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Vec3};
use crate::par::Execution;
use crate::stimulus::{
    envelope_at, sample_count, trajectory_at, FociFrame, Preset, StimulusDoc, StimulusSpec,
};
use crate::synthesis::{stream_drive_with, DriveFrame, SynthesisMode, SynthesisOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandState {
    pub palm_center: Vec3,
    /// Measured palm height, m.
    pub y_hand: f64,
    pub in_contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandKeyframe {
    pub t_s: f64,
    pub palm_center_m: [f64; 3],
    pub in_contact: bool,
}

/// Scripted hand motion standing in for the tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HandScript {
    /// Palm held still and touching the object throughout.
    Stationary {
        #[serde(default = "default_palm")]
        palm_center_m: [f64; 3],
    },
    /// Palm translating at constant velocity, touching throughout.
    Moving {
        start_m: [f64; 3],
        velocity_mps: [f64; 3],
    },
    /// Palm never touches the object.
    NoContact {
        #[serde(default = "default_palm")]
        palm_center_m: [f64; 3],
    },
    /// Sample-and-hold over time-ordered keyframes; before the first keyframe
    /// the hand is out of contact.
    Keyframes { frames: Vec<HandKeyframe> },
}

fn default_palm() -> [f64; 3] {
    [0.0, 0.2, 0.0]
}

impl Default for HandScript {
    fn default() -> Self {
        HandScript::Stationary {
            palm_center_m: default_palm(),
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl HandScript {
    pub fn state_at(&self, t: f64) -> HandState {
        let (palm, contact) = match self {
            HandScript::Stationary { palm_center_m } => (v3(*palm_center_m), true),
            HandScript::Moving {
                start_m,
                velocity_mps,
            } => (v3(*start_m) + v3(*velocity_mps) * t, true),
            HandScript::NoContact { palm_center_m } => (v3(*palm_center_m), false),
            HandScript::Keyframes { frames } => match frames.iter().rev().find(|k| k.t_s <= t) {
                Some(k) => (v3(k.palm_center_m), k.in_contact),
                None => (
                    frames.first().map_or(Vec3::zeros(), |k| v3(k.palm_center_m)),
                    false,
                ),
            },
        };
        HandState {
            palm_center: palm,
            y_hand: palm.y,
            in_contact: contact,
        }
    }

    fn validate(&self) -> Result<()> {
        if let HandScript::Keyframes { frames } = self {
            if frames.windows(2).any(|w| !(w[1].t_s >= w[0].t_s)) {
                return Err(Error::Config("hand keyframes must be time-ordered".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Object centre `(x, z)` at the middle of the stroke, m.
    pub sphere_center_xz: (f64, f64),
    /// m; zero keeps the object still for the stimulus duration.
    pub stroke_length: f64,
    /// m/s
    pub stroke_speed: f64,
    pub tracking_rate: f64,
    pub frame_rate: f64,
    pub hand: HandScript,
    pub synthesis: SynthesisOptions,
}

impl Default for SessionConfig {
    /// 7 cm stroke at 1.8 cm/s over a stationary palm 0.2 m above the array.
    fn default() -> Self {
        Self {
            sphere_center_xz: (0.0, 0.0),
            stroke_length: 0.07,
            stroke_speed: 0.018,
            tracking_rate: 90.0,
            frame_rate: 1000.0,
            hand: HandScript::default(),
            synthesis: SynthesisOptions::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tracking_rate", self.tracking_rate),
            ("frame_rate", self.frame_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.stroke_length.is_finite() && self.stroke_length >= 0.0) {
            return Err(Error::Config(format!(
                "stroke_length must be >= 0, got {}",
                self.stroke_length
            )));
        }
        if self.stroke_length > 0.0 && !(self.stroke_speed.is_finite() && self.stroke_speed > 0.0) {
            return Err(Error::Config(format!(
                "stroke_speed must be > 0 for a stroke, got {}",
                self.stroke_speed
            )));
        }
        self.hand.validate()
    }

    /// Session length: the stroke time, or the stimulus duration without a stroke.
    pub fn duration(&self, spec: &StimulusSpec) -> f64 {
        if self.stroke_length > 0.0 {
            self.stroke_length / self.stroke_speed
        } else {
            spec.duration
        }
    }

    /// Object centre at time `t`; the stroke runs along +x and is centred on
    /// `sphere_center_xz`.
    pub fn sphere_xz_at(&self, t: f64) -> (f64, f64) {
        let (x, z) = self.sphere_center_xz;
        if self.stroke_length > 0.0 {
            (x - self.stroke_length / 2.0 + self.stroke_speed * t, z)
        } else {
            (x, z)
        }
    }
}

/// Stimulus centre for a hand touching an object centred at `sphere_xz`;
/// `None` when the hand is not in contact.
pub fn contact_center(sphere_xz: (f64, f64), hand: &HandState) -> Option<Vec3> {
    hand.in_contact
        .then(|| Vec3::new(sphere_xz.0, hand.y_hand, sphere_xz.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingEvent {
    pub time: f64,
    pub hand: HandState,
    pub center: Option<Vec3>,
}

/// Contents of a drive-log file.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveLog {
    pub transducer_count: u32,
    pub frame_dt: f64,
    pub frames: Vec<DriveFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub stimulus: StimulusSpec,
    pub duration: f64,
    pub tracking_events: Vec<TrackingEvent>,
    pub foci_frames: Vec<FociFrame>,
    pub drive: DriveLog,
    pub warnings: Vec<String>,
}

pub fn run_stroke_session(
    geometry: &ArrayGeometry,
    config: &SessionConfig,
    spec: &StimulusSpec,
) -> Result<SessionLog> {
    run_stroke_session_with(geometry, config, spec, Execution::default())
}

pub fn run_stroke_session_with(
    geometry: &ArrayGeometry,
    config: &SessionConfig,
    spec: &StimulusSpec,
    exec: Execution,
) -> Result<SessionLog> {
    config.validate()?;
    spec.validate()?;
    let duration = config.duration(spec);
    let tick_count = {
        let x = duration * config.tracking_rate;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            x.ceil() as usize
        }
    };

    let mut tracking_events = Vec::with_capacity(tick_count);
    // stimulus-clock origin for the contact interval each tick belongs to
    let mut onsets = Vec::with_capacity(tick_count);
    let mut onset: Option<f64> = None;
    for m in 0..tick_count {
        let t = m as f64 / config.tracking_rate;
        let hand = config.hand.state_at(t);
        let center = contact_center(config.sphere_xz_at(t), &hand);
        onset = match (center, onset) {
            (Some(_), None) => Some(t),
            (Some(_), o) => o,
            (None, _) => None,
        };
        onsets.push(onset);
        tracking_events.push(TrackingEvent {
            time: t,
            hand,
            center,
        });
    }

    let mut foci_frames = Vec::new();
    for k in 0..sample_count(duration, config.frame_rate) {
        let t = k as f64 / config.frame_rate;
        let m = ((t * config.tracking_rate + 1e-9).floor() as usize).min(tick_count.saturating_sub(1));
        let (Some(center), Some(start)) = (tracking_events[m].center, onsets[m]) else {
            continue;
        };
        let local = (t - start).max(0.0);
        foci_frames.push(FociFrame {
            time: t,
            foci: trajectory_at(spec, center, local)?,
            amplitude: envelope_at(spec, local),
        });
    }

    let mut warnings = Vec::new();
    if tracking_events.iter().all(|e| e.center.is_none()) {
        warnings.push("hand never contacted the object; no stimulus was presented".to_string());
    }

    let frames = stream_drive_with(geometry, &foci_frames, &config.synthesis, exec)?;
    Ok(SessionLog {
        stimulus: *spec,
        duration,
        tracking_events,
        foci_frames,
        drive: DriveLog {
            transducer_count: geometry.len() as u32,
            frame_dt: 1.0 / config.frame_rate,
            frames,
        },
        warnings,
    })
}

/// Write the tracking events as CSV with header `t_s,y_hand_m,in_contact`.
pub fn write_tracking_csv<W: Write>(events: &[TrackingEvent], mut w: W) -> Result<()> {
    writeln!(w, "t_s,y_hand_m,in_contact")?;
    for e in events {
        writeln!(w, "{},{},{}", e.time, e.hand.y_hand, u8::from(e.hand.in_contact))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSummary {
    pub duration_s: f64,
    pub frame_count: usize,
    pub tracking_events: usize,
    pub contact_events: usize,
    pub transducer_count: u32,
    pub frame_dt_s: f64,
    pub stimulus: StimulusDoc,
    pub warnings: Vec<String>,
}

impl SessionLog {
    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            duration_s: self.duration,
            frame_count: self.drive.frames.len(),
            tracking_events: self.tracking_events.len(),
            contact_events: self.tracking_events.iter().filter(|e| e.center.is_some()).count(),
            transducer_count: self.drive.transducer_count,
            frame_dt_s: self.drive.frame_dt,
            stimulus: self.stimulus.into(),
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON session description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfigDoc {
    #[serde(default)]
    pub sphere_center_xz_m: [f64; 2],
    #[serde(default = "default_stroke_length")]
    pub stroke_length_m: f64,
    #[serde(default = "default_stroke_speed")]
    pub stroke_speed_mps: f64,
    #[serde(default = "default_tracking_rate")]
    pub tracking_rate_hz: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub hand: HandScript,
    /// Preset name; ignored when `stimulus` is given.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub stimulus: Option<StimulusDoc>,
    #[serde(default)]
    pub literal_phase_sum: bool,
    #[serde(default)]
    pub quantize_phase: bool,
}

fn default_stroke_length() -> f64 {
    0.07
}
fn default_stroke_speed() -> f64 {
    0.018
}
fn default_tracking_rate() -> f64 {
    90.0
}
fn default_frame_rate() -> f64 {
    1000.0
}

impl Default for SessionConfigDoc {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl SessionConfigDoc {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Resolve into a session configuration and stimulus (default `S-Mix2`).
    pub fn resolve(&self) -> Result<(SessionConfig, StimulusSpec)> {
        let spec = match (&self.stimulus, &self.preset) {
            (Some(doc), _) => StimulusSpec::from(*doc),
            (None, Some(name)) => crate::stimulus::preset(name)?,
            (None, None) => Preset::Mix2.spec(),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        let config = SessionConfig {
            sphere_center_xz: (self.sphere_center_xz_m[0], self.sphere_center_xz_m[1]),
            stroke_length: self.stroke_length_m,
            stroke_speed: self.stroke_speed_mps,
            tracking_rate: self.tracking_rate_hz,
            frame_rate: self.frame_rate_hz,
            hand: self.hand.clone(),
            synthesis: SynthesisOptions {
                mode: if self.literal_phase_sum {
                    SynthesisMode::LiteralPhaseSum
                } else {
                    SynthesisMode::Superposition
                },
                quantize_phase: self.quantize_phase,
            },
        };
        config.validate()?;
        Ok((config, spec))
    }
}

/// Deliver frames to `sink`; with `realtime` each frame is held back until its
/// timestamp has elapsed on the wall clock.
pub fn replay<F: FnMut(&DriveFrame)>(log: &DriveLog, realtime: bool, mut sink: F) {
    let start = Instant::now();
    let t0 = log.frames.first().map_or(0.0, |f| f.time);
    for f in &log.frames {
        if realtime {
            let due = Duration::from_secs_f64((f.time - t0).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        sink(f);
    }
}

pub mod udf {
    //! `UDF1` drive-log format, little-endian:
    //!
    //! ```text
    //! magic "UDF1" | u32 version = 1 | u32 transducer_count | f64 frame_dt_s | u64 frame_count
    //! per frame: f64 t_s, then transducer_count × (u16 amplitude·65535, u16 phase/2π·65536)
    //! ```

    use std::f64::consts::TAU;
    use std::path::Path;

    use super::DriveLog;
    use crate::error::{Error, Result};
    use crate::synthesis::DriveFrame;

    pub const MAGIC: &[u8; 4] = b"UDF1";
    pub const VERSION: u32 = 1;
    pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

    pub fn quantize_amplitude(a: f64) -> u16 {
        (a.clamp(0.0, 1.0) * 65535.0).round() as u16
    }

    pub fn quantize_phase(p: f64) -> u16 {
        ((p / TAU * 65536.0).round() as i64).rem_euclid(65536) as u16
    }

    pub fn amplitude_value(q: u16) -> f64 {
        q as f64 / 65535.0
    }

    pub fn phase_value(q: u16) -> f64 {
        q as f64 / 65536.0 * TAU
    }

    impl DriveLog {
        /// The log as it reads back from disk.
        pub fn quantized(&self) -> DriveLog {
            DriveLog {
                transducer_count: self.transducer_count,
                frame_dt: self.frame_dt,
                frames: self
                    .frames
                    .iter()
                    .map(|f| DriveFrame {
                        time: f.time,
                        amplitudes: f
                            .amplitudes
                            .iter()
                            .map(|&a| amplitude_value(quantize_amplitude(a)))
                            .collect(),
                        phases: f.phases.iter().map(|&p| phase_value(quantize_phase(p))).collect(),
                    })
                    .collect(),
            }
        }
    }

    pub fn encode(log: &DriveLog) -> Result<Vec<u8>> {
        let n = log.transducer_count as usize;
        let mut out = Vec::with_capacity(HEADER_LEN + log.frames.len() * (8 + 4 * n));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&log.transducer_count.to_le_bytes());
        out.extend_from_slice(&log.frame_dt.to_le_bytes());
        out.extend_from_slice(&(log.frames.len() as u64).to_le_bytes());
        for (k, f) in log.frames.iter().enumerate() {
            if f.amplitudes.len() != n || f.phases.len() != n {
                return Err(Error::Argument(format!(
                    "frame {k} has {} transducers, log declares {n}",
                    f.amplitudes.len()
                )));
            }
            out.extend_from_slice(&f.time.to_le_bytes());
            for (&a, &p) in f.amplitudes.iter().zip(&f.phases) {
                out.extend_from_slice(&quantize_amplitude(a).to_le_bytes());
                out.extend_from_slice(&quantize_phase(p).to_le_bytes());
            }
        }
        Ok(out)
    }

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
            let end = self.pos + N;
            if end > self.buf.len() {
                return Err(Error::Format {
                    offset: self.pos as u64,
                    reason: format!("truncated while reading {what}"),
                });
            }
            let mut b = [0u8; N];
            b.copy_from_slice(&self.buf[self.pos..end]);
            self.pos = end;
            Ok(b)
        }
    }

    pub fn decode(buf: &[u8]) -> Result<DriveLog> {
        let mut r = Reader { buf, pos: 0 };
        let magic = r.take::<4>("magic")?;
        if &magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {magic:?}"),
            });
        }
        let version = u32::from_le_bytes(r.take("version")?);
        if version != VERSION {
            return Err(Error::Format {
                offset: 4,
                reason: format!("unsupported version {version}"),
            });
        }
        let transducer_count = u32::from_le_bytes(r.take("transducer count")?);
        let frame_dt = f64::from_le_bytes(r.take("frame interval")?);
        let frame_count = u64::from_le_bytes(r.take("frame count")?);
        let n = transducer_count as usize;
        let frame_len = 8 + 4 * n as u64;
        let remaining = (buf.len() - HEADER_LEN) as u64;
        if frame_count.checked_mul(frame_len).is_none_or(|need| need > remaining) {
            // point at the first frame that cannot be complete
            let whole = remaining / frame_len;
            return Err(Error::Format {
                offset: HEADER_LEN as u64 + whole * frame_len,
                reason: format!(
                    "truncated: header declares {frame_count} frames, {whole} complete frames present"
                ),
            });
        }
        let mut frames = Vec::with_capacity(frame_count as usize);
        for _ in 0..frame_count {
            let time = f64::from_le_bytes(r.take("frame time")?);
            let mut amplitudes = Vec::with_capacity(n);
            let mut phases = Vec::with_capacity(n);
            for _ in 0..n {
                amplitudes.push(amplitude_value(u16::from_le_bytes(r.take("amplitude")?)));
                phases.push(phase_value(u16::from_le_bytes(r.take("phase")?)));
            }
            frames.push(DriveFrame {
                time,
                amplitudes,
                phases,
            });
        }
        if r.pos != buf.len() {
            return Err(Error::Format {
                offset: r.pos as u64,
                reason: format!(
                    "frame count mismatch: {} trailing bytes after {frame_count} frames",
                    buf.len() - r.pos
                ),
            });
        }
        Ok(DriveLog {
            transducer_count,
            frame_dt,
            frames,
        })
    }

    pub fn write(log: &DriveLog, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, encode(log)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<DriveLog> {
        decode(&std::fs::read(path)?)
    }
}

pub fn write_drive_log(log: &DriveLog, path: impl AsRef<Path>) -> Result<()> {
    udf::write(log, path)
}

pub fn read_drive_log(path: impl AsRef<Path>) -> Result<DriveLog> {
    udf::read(path)
}
