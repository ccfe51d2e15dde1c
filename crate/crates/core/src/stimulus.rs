//! Lateral-modulation trajectories, amplitude-modulation envelopes and the
//! named stimulus presets.
//!
//! A stimulus is `N` foci rotating at `f_lm` on a circle of radius `r` around
//! the contact centre, with adjacent foci a straight-line distance `d` apart.
//! Every transducer shares one amplitude
//! `A = a_max * (a_am * (λ Φ1 + (1-λ) Φ2) + 1 - a_am)` where
//! `Φk = (cos(2π f_amk t) + 1) / 2`.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Default foci update rate, Hz.
pub const DEFAULT_FRAME_RATE: f64 = 1000.0;

/// Parameters of one renderable stimulus.
///
/// Lengths are held in millimetres so that the JSON document (which is in mm)
/// round-trips bit-exactly; use [`StimulusSpec::radius`] and
/// [`StimulusSpec::spacing`] for SI values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusSpec {
    pub f_lm: f64,
    pub radius_mm: f64,
    pub spacing_mm: f64,
    pub foci_count: usize,
    pub f_am1: f64,
    pub f_am2: f64,
    pub lambda: f64,
    pub a_am: f64,
    pub a_max: f64,
    /// s
    pub duration: f64,
}

impl Default for StimulusSpec {
    /// Plain lateral modulation: 5 foci, 5 Hz, r = 3.3 mm, d = 1 mm, no AM.
    fn default() -> Self {
        Self {
            f_lm: 5.0,
            radius_mm: 3.3,
            spacing_mm: 1.0,
            foci_count: 5,
            f_am1: 30.0,
            f_am2: 150.0,
            lambda: 0.0,
            a_am: 0.0,
            a_max: 1.0,
            duration: 1.0,
        }
    }
}

impl StimulusSpec {
    /// m
    pub fn radius(&self) -> f64 {
        self.radius_mm * 1e-3
    }

    /// m
    pub fn spacing(&self) -> f64 {
        self.spacing_mm * 1e-3
    }

    pub fn with_a_am(mut self, a_am: f64) -> Self {
        self.a_am = a_am;
        self
    }

    pub fn with_a_max(mut self, a_max: f64) -> Self {
        self.a_max = a_max;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("lambda", self.lambda)?;
        unit("a_am", self.a_am)?;
        unit("a_max", self.a_max)?;
        for (name, v) in [
            ("f_lm", self.f_lm),
            ("f_am1", self.f_am1),
            ("f_am2", self.f_am2),
            ("duration", self.duration),
            ("spacing", self.spacing_mm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.radius_mm.is_finite() && self.radius_mm > 0.0) {
            return Err(Error::Argument(format!(
                "radius must be > 0, got {} mm",
                self.radius_mm
            )));
        }
        if self.foci_count == 0 {
            return Err(Error::Argument("foci_count must be >= 1".into()));
        }
        if self.spacing_mm > 2.0 * self.radius_mm {
            return Err(Error::Geometry(format!(
                "spacing {} mm exceeds the trajectory diameter {} mm",
                self.spacing_mm,
                2.0 * self.radius_mm
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: StimulusDoc = serde_json::from_str(s)?;
        let spec = StimulusSpec::from(doc);
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&StimulusDoc::from(*self)).expect("plain struct serializes")
    }
}

/// JSON form of [`StimulusSpec`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusDoc {
    pub f_lm_hz: f64,
    pub radius_mm: f64,
    pub spacing_mm: f64,
    pub foci_count: usize,
    pub f_am1_hz: f64,
    pub f_am2_hz: f64,
    pub lambda: f64,
    pub a_am: f64,
    pub a_max: f64,
    pub duration_s: f64,
}

impl From<StimulusDoc> for StimulusSpec {
    fn from(d: StimulusDoc) -> Self {
        Self {
            f_lm: d.f_lm_hz,
            radius_mm: d.radius_mm,
            spacing_mm: d.spacing_mm,
            foci_count: d.foci_count,
            f_am1: d.f_am1_hz,
            f_am2: d.f_am2_hz,
            lambda: d.lambda,
            a_am: d.a_am,
            a_max: d.a_max,
            duration: d.duration_s,
        }
    }
}

impl From<StimulusSpec> for StimulusDoc {
    fn from(s: StimulusSpec) -> Self {
        Self {
            f_lm_hz: s.f_lm,
            radius_mm: s.radius_mm,
            spacing_mm: s.spacing_mm,
            foci_count: s.foci_count,
            f_am1_hz: s.f_am1,
            f_am2_hz: s.f_am2,
            lambda: s.lambda,
            a_am: s.a_am,
            a_max: s.a_max,
            duration_s: s.duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Lm,
    Am30,
    Am150,
    Mix1,
    Mix2,
    Am30Weak,
    Am30Strong,
    Am150Weak,
    Am150Strong,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Lm,
        Preset::Am30,
        Preset::Am150,
        Preset::Mix1,
        Preset::Mix2,
        Preset::Am30Weak,
        Preset::Am30Strong,
        Preset::Am150Weak,
        Preset::Am150Strong,
    ];

    /// Stimuli differing in modulation allocation λ.
    pub const ALLOCATION_SET: [Preset; 5] = [
        Preset::Am30,
        Preset::Am150,
        Preset::Mix1,
        Preset::Mix2,
        Preset::Lm,
    ];

    /// Stimuli differing in modulation depth, used for discrimination and
    /// texture comparison.
    pub const TEXTURE_SET: [Preset; 6] = [
        Preset::Lm,
        Preset::Am30Weak,
        Preset::Am30Strong,
        Preset::Am150Weak,
        Preset::Am150Strong,
        Preset::Mix2,
    ];

    /// Modulated stimuli whose depth is swept in threshold and intensity runs.
    pub const SWEEP_SET: [Preset; 4] = [Preset::Am30, Preset::Am150, Preset::Mix1, Preset::Mix2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Lm => "S-LM",
            Preset::Am30 => "S-30Hz",
            Preset::Am150 => "S-150Hz",
            Preset::Mix1 => "S-Mix1",
            Preset::Mix2 => "S-Mix2",
            Preset::Am30Weak => "S-30Hz-w",
            Preset::Am30Strong => "S-30Hz-s",
            Preset::Am150Weak => "S-150Hz-w",
            Preset::Am150Strong => "S-150Hz-s",
        }
    }

    /// `None` when the stimulus carries no modulation, so λ is meaningless.
    pub fn lambda(self) -> Option<f64> {
        match self {
            Preset::Lm => None,
            Preset::Am30 | Preset::Am30Weak | Preset::Am30Strong => Some(1.0),
            Preset::Am150 | Preset::Am150Weak | Preset::Am150Strong => Some(0.0),
            Preset::Mix1 => Some(0.5),
            Preset::Mix2 => Some(0.7),
        }
    }

    pub fn a_am(self) -> f64 {
        match self {
            Preset::Lm => 0.0,
            Preset::Am30Weak => 0.5,
            Preset::Am150Weak => 0.3,
            _ => 1.0,
        }
    }

    pub fn spec(self) -> StimulusSpec {
        StimulusSpec {
            lambda: self.lambda().unwrap_or(0.0),
            a_am: self.a_am(),
            ..StimulusSpec::default()
        }
    }

    pub fn valid_names() -> String {
        Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Lookup {
                kind: "preset",
                name: s.to_string(),
                valid: Preset::valid_names(),
            })
    }
}

pub fn preset(name: &str) -> Result<StimulusSpec> {
    Ok(name.parse::<Preset>()?.spec())
}

/// How the angular offset between neighbouring foci is derived from `d` and `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetRule {
    /// `2·asin(d / 2r)` per neighbour: the chord between adjacent foci is exactly `d`.
    #[default]
    ChordExact,
    /// `d / r` per neighbour (arc length `d`).
    SmallAngle,
}

impl OffsetRule {
    pub fn step(self, spec: &StimulusSpec) -> f64 {
        match self {
            OffsetRule::ChordExact => 2.0 * (spec.spacing_mm / (2.0 * spec.radius_mm)).asin(),
            OffsetRule::SmallAngle => spec.spacing_mm / spec.radius_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FociFrame {
    pub time: f64,
    pub foci: Vec<Vec3>,
    pub amplitude: f64,
}

/// `2π·frac(f·t)`; keeps the argument small so long runs stay periodic to
/// rounding precision.
pub fn cycle_angle(f: f64, t: f64) -> f64 {
    TAU * (f * t).fract()
}

pub fn trajectory_at(spec: &StimulusSpec, center: Vec3, t: f64) -> Result<Vec<Vec3>> {
    trajectory_with(spec, center, t, OffsetRule::ChordExact)
}

/// Foci positions at time `t`. Focus `i` (zero-based) sits at angle
/// `2π f_lm t + i·step` measured from +x towards +z in the plane `y = center.y`.
pub fn trajectory_with(
    spec: &StimulusSpec,
    center: Vec3,
    t: f64,
    rule: OffsetRule,
) -> Result<Vec<Vec3>> {
    if spec.spacing_mm > 2.0 * spec.radius_mm {
        return Err(Error::Geometry(format!(
            "spacing {} mm exceeds the trajectory diameter {} mm",
            spec.spacing_mm,
            2.0 * spec.radius_mm
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time must be >= 0, got {t}")));
    }
    let r = spec.radius();
    let step = rule.step(spec);
    let base = cycle_angle(spec.f_lm, t);
    Ok((0..spec.foci_count)
        .map(|i| {
            let (s, c) = (base + i as f64 * step).sin_cos();
            Vec3::new(center.x + r * c, center.y, center.z + r * s)
        })
        .collect())
}

/// Modulated transducer amplitude at time `t`.
pub fn envelope_at(spec: &StimulusSpec, t: f64) -> f64 {
    let phi1 = 0.5 * (cycle_angle(spec.f_am1, t).cos() + 1.0);
    let phi2 = 0.5 * (cycle_angle(spec.f_am2, t).cos() + 1.0);
    let modulation = spec.a_am * (spec.lambda * phi1 + (1.0 - spec.lambda) * phi2) + 1.0 - spec.a_am;
    (spec.a_max * modulation).clamp(0.0, spec.a_max)
}

/// Number of samples in `[0, duration)` at `rate`; products within 1e-9 of an
/// integer are treated as that integer.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    let x = duration * rate;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

pub fn render_stimulus(spec: &StimulusSpec, center: Vec3, frame_rate: f64) -> Result<Vec<FociFrame>> {
    spec.validate()?;
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(Error::Argument(format!("frame rate must be > 0, got {frame_rate}")));
    }
    (0..sample_count(spec.duration, frame_rate))
        .map(|k| {
            let t = k as f64 / frame_rate;
            Ok(FociFrame {
                time: t,
                foci: trajectory_at(spec, center, t)?,
                amplitude: envelope_at(spec, t),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl EnvelopeSeries {
    pub fn render(spec: &StimulusSpec, sample_rate: f64) -> Result<Self> {
        spec.validate()?;
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Argument(format!("sample rate must be > 0, got {sample_rate}")));
        }
        let samples = (0..sample_count(spec.duration, sample_rate))
            .map(|k| envelope_at(spec, k as f64 / sample_rate))
            .collect();
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 / self.sample_rate)
    }

    /// CSV with header `t_s,amplitude`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,amplitude")?;
        for (t, a) in self.times().zip(&self.samples) {
            writeln!(w, "{t},{a}")?;
        }
        Ok(())
    }

    /// Parse the CSV written by [`EnvelopeSeries::write_csv`]; the sample rate
    /// is taken from the first timestamp step.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("t_s,amplitude") {
            return Err(Error::Argument("missing header `t_s,amplitude`".into()));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (t, a) = line
                .split_once(',')
                .ok_or_else(|| Error::Argument(format!("line {}: expected two columns", n + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Argument(format!("line {}: {e}", n + 2)))
            };
            times.push(parse(t)?);
            samples.push(parse(a)?);
        }
        if times.len() < 2 {
            return Err(Error::Argument("need at least two samples to infer the rate".into()));
        }
        let sample_rate = 1.0 / (times[1] - times[0]);
        Ok(Self {
            sample_rate,
            samples,
        })
    }
}

/// CSV with header `t_s,focus,x_m,y_m,z_m,amplitude`; one row per focus.
pub fn write_foci_csv<W: Write>(frames: &[FociFrame], mut w: W) -> Result<()> {
    writeln!(w, "t_s,focus,x_m,y_m,z_m,amplitude")?;
    for f in frames {
        for (i, p) in f.foci.iter().enumerate() {
            writeln!(w, "{},{},{},{},{},{}", f.time, i + 1, p.x, p.y, p.z, f.amplitude)?;
        }
    }
    Ok(())
}
