//! Transducer array layout and acoustic medium.
//!
//! Every unit is an identical rectangular grid of transducers lying in its local
//! xz-plane and facing local +y. A rigid 4×4 transform places each unit in the
//! world frame. The default rig is eight 249-transducer units (18×14 grid with
//! three empty sites) tiled 4×2 in the y=0 plane, centred on the origin and
//! radiating towards +y.

use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Pitch of the default unit grid, in metres.
pub const DEFAULT_PITCH: f64 = 10.16e-3;
/// Centre-to-centre spacing of tiled units along world x and z, in metres.
pub const DEFAULT_UNIT_SPAN_X: f64 = 192.0e-3;
pub const DEFAULT_UNIT_SPAN_Z: f64 = 151.4e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// m/s
    pub speed_of_sound: f64,
    /// Hz
    pub carrier_frequency: f64,
    /// kg/m^3
    pub air_density: f64,
}

impl Default for Medium {
    /// Air at 25 °C driven at 40 kHz.
    fn default() -> Self {
        Self {
            speed_of_sound: 346.0,
            carrier_frequency: 40_000.0,
            air_density: 1.184,
        }
    }
}

impl Medium {
    pub fn new(speed_of_sound: f64, carrier_frequency: f64, air_density: f64) -> Result<Self> {
        let m = Self {
            speed_of_sound,
            carrier_frequency,
            air_density,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speed_of_sound", self.speed_of_sound),
            ("carrier_frequency", self.carrier_frequency),
            ("air_density", self.air_density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_sound / self.carrier_frequency
    }

    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength()
    }

    /// Characteristic acoustic impedance-like term ρc² used by radiation force.
    pub fn rho_c2(&self) -> f64 {
        self.air_density * self.speed_of_sound * self.speed_of_sound
    }
}

pub fn wavelength(medium: &Medium) -> f64 {
    medium.wavelength()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransducerPose {
    pub position: Vec3,
    /// Unit vector along the radiating axis.
    pub normal: Vec3,
}

impl TransducerPose {
    pub fn new(position: Vec3, normal: Vec3) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "transducer normal must be a unit vector, |n| = {}",
                normal.norm()
            )));
        }
        Ok(Self { position, normal })
    }
}

/// Grid of transducer sites within one unit. `gaps` lists `(col, row)` sites
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitLayout {
    pub cols: usize,
    pub rows: usize,
    #[serde(default)]
    pub gaps: Vec<(usize, usize)>,
}

impl Default for UnitLayout {
    fn default() -> Self {
        Self {
            cols: 18,
            rows: 14,
            gaps: vec![(1, 1), (2, 1), (16, 1)],
        }
    }
}

impl UnitLayout {
    pub fn single() -> Self {
        Self {
            cols: 1,
            rows: 1,
            gaps: Vec::new(),
        }
    }

    fn is_gap(&self, col: usize, row: usize) -> bool {
        self.gaps.iter().any(|&(c, r)| c == col && r == row)
    }

    /// Occupied `(col, row)` sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows)
            .flat_map(move |r| (0..self.cols).map(move |c| (c, r)))
            .filter(move |&(c, r)| !self.is_gap(c, r))
    }

    pub fn count(&self) -> usize {
        self.sites().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub layout: UnitLayout,
    /// m
    pub pitch: f64,
    /// Rigid unit → world transforms (translation in metres).
    pub unit_transforms: Vec<Matrix4<f64>>,
    pub medium: Medium,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        let layout = UnitLayout::default();
        let pitch = DEFAULT_PITCH;
        let half_x = (layout.cols - 1) as f64 * pitch / 2.0;
        let half_z = (layout.rows - 1) as f64 * pitch / 2.0;
        let mut unit_transforms = Vec::with_capacity(8);
        for row in 0..2 {
            for col in 0..4 {
                let cx = (col as f64 - 1.5) * DEFAULT_UNIT_SPAN_X;
                let cz = (row as f64 - 0.5) * DEFAULT_UNIT_SPAN_Z;
                unit_transforms.push(Matrix4::new_translation(&Vec3::new(
                    cx - half_x,
                    0.0,
                    cz - half_z,
                )));
            }
        }
        Self {
            layout,
            pitch,
            unit_transforms,
            medium: Medium::default(),
        }
    }
}

impl ArrayConfig {
    /// One transducer at the origin facing +y.
    pub fn single_transducer(medium: Medium) -> Self {
        Self {
            layout: UnitLayout::single(),
            pitch: DEFAULT_PITCH,
            unit_transforms: vec![Matrix4::identity()],
            medium,
        }
    }

    pub fn units(&self) -> usize {
        self.unit_transforms.len()
    }

    pub fn transducers_per_unit(&self) -> usize {
        self.layout.count()
    }

    pub fn total_transducers(&self) -> usize {
        self.units() * self.transducers_per_unit()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ArrayConfigDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ArrayConfigDoc::from(self))?)
    }
}

/// On-disk array description. Lengths are in millimetres; `unit_transforms`
/// are 4×4 row-major rigid transforms whose translation column is in mm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayConfigDoc {
    pub units: usize,
    pub pitch_mm: f64,
    #[serde(default)]
    pub grid: UnitLayout,
    pub unit_transforms: Vec<[f64; 16]>,
    #[serde(default)]
    pub medium: MediumDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediumDoc {
    pub speed_of_sound_mps: f64,
    pub carrier_frequency_hz: f64,
    pub air_density_kgpm3: f64,
}

impl Default for MediumDoc {
    fn default() -> Self {
        let m = Medium::default();
        Self {
            speed_of_sound_mps: m.speed_of_sound,
            carrier_frequency_hz: m.carrier_frequency,
            air_density_kgpm3: m.air_density,
        }
    }
}

impl TryFrom<ArrayConfigDoc> for ArrayConfig {
    type Error = Error;

    fn try_from(doc: ArrayConfigDoc) -> Result<Self> {
        if doc.units != doc.unit_transforms.len() {
            return Err(Error::Config(format!(
                "units = {} but {} unit_transforms given",
                doc.units,
                doc.unit_transforms.len()
            )));
        }
        let unit_transforms = doc
            .unit_transforms
            .iter()
            .map(|m| {
                let mut t = Matrix4::from_row_slice(m);
                for r in 0..3 {
                    t[(r, 3)] *= 1e-3;
                }
                t
            })
            .collect();
        Ok(Self {
            layout: doc.grid,
            pitch: doc.pitch_mm * 1e-3,
            unit_transforms,
            medium: Medium::new(
                doc.medium.speed_of_sound_mps,
                doc.medium.carrier_frequency_hz,
                doc.medium.air_density_kgpm3,
            )?,
        })
    }
}

impl From<&ArrayConfig> for ArrayConfigDoc {
    fn from(c: &ArrayConfig) -> Self {
        let unit_transforms = c
            .unit_transforms
            .iter()
            .map(|t| {
                let mut out = [0.0; 16];
                for r in 0..4 {
                    for col in 0..4 {
                        let v = t[(r, col)];
                        out[r * 4 + col] = if col == 3 && r < 3 { v * 1e3 } else { v };
                    }
                }
                out
            })
            .collect();
        Self {
            units: c.units(),
            pitch_mm: c.pitch * 1e3,
            grid: c.layout.clone(),
            unit_transforms,
            medium: MediumDoc {
                speed_of_sound_mps: c.medium.speed_of_sound,
                carrier_frequency_hz: c.medium.carrier_frequency,
                air_density_kgpm3: c.medium.air_density,
            },
        }
    }
}

/// Flattened, immutable array geometry.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    config: ArrayConfig,
    poses: Vec<TransducerPose>,
}

impl ArrayGeometry {
    pub fn poses(&self) -> &[TransducerPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn medium(&self) -> &Medium {
        &self.config.medium
    }

    pub fn centroid(&self) -> Vec3 {
        let sum: Vec3 = self.poses.iter().map(|p| p.position).sum();
        sum / self.poses.len() as f64
    }

    /// Smallest centre-to-centre distance between any two transducers.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.poses.iter().enumerate() {
            for b in &self.poses[i + 1..] {
                best = best.min((a.position - b.position).norm());
            }
        }
        best
    }

    /// Same geometry shifted rigidly by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        let mut config = self.config.clone();
        for t in &mut config.unit_transforms {
            *t = Matrix4::new_translation(&offset) * *t;
        }
        let poses = self
            .poses
            .iter()
            .map(|p| TransducerPose {
                position: p.position + offset,
                normal: p.normal,
            })
            .collect();
        Self { config, poses }
    }
}

fn check_rigid(t: &Matrix4<f64>, unit: usize) -> Result<()> {
    let rot: Matrix3<f64> = t.fixed_view::<3, 3>(0, 0).into_owned();
    let err = (rot.transpose() * rot - Matrix3::identity()).abs().max();
    let bottom = t.row(3).into_owned() - Vector4::new(0.0, 0.0, 0.0, 1.0).transpose();
    if err > 1e-9 || (rot.determinant() - 1.0).abs() > 1e-9 || bottom.abs().max() > 0.0 {
        return Err(Error::Config(format!(
            "unit_transforms[{unit}] is not a rigid transform"
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("unit_transforms[{unit}] is not finite")));
    }
    Ok(())
}

/// Flatten `config` into a transducer list, unit-major then row-major within
/// each unit.
pub fn build_array(config: ArrayConfig) -> Result<ArrayGeometry> {
    config.medium.validate()?;
    if config.unit_transforms.is_empty() {
        return Err(Error::Config("array has zero units".into()));
    }
    if !(config.pitch.is_finite() && config.pitch > 0.0) {
        return Err(Error::Config(format!("pitch must be > 0, got {}", config.pitch)));
    }
    if config.layout.count() == 0 {
        return Err(Error::Config("unit layout has no transducers".into()));
    }
    if let Some(&(c, r)) = config
        .layout
        .gaps
        .iter()
        .find(|&&(c, r)| c >= config.layout.cols || r >= config.layout.rows)
    {
        return Err(Error::Config(format!("gap ({c}, {r}) outside the unit grid")));
    }

    let local_normal = Vec3::y();
    let mut poses = Vec::with_capacity(config.total_transducers());
    for (u, t) in config.unit_transforms.iter().enumerate() {
        check_rigid(t, u)?;
        let rot: Matrix3<f64> = t.fixed_view::<3, 3>(0, 0).into_owned();
        let normal = (rot * local_normal).normalize();
        for (c, r) in config.layout.sites() {
            let local = Vec3::new(c as f64 * config.pitch, 0.0, r as f64 * config.pitch);
            let position = t.transform_point(&local.into()).coords;
            poses.push(TransducerPose { position, normal });
        }
    }

    let geometry = ArrayGeometry { config, poses };
    if geometry.len() > 1 {
        let min = geometry.min_pairwise_distance();
        let limit = 0.9 * geometry.config.pitch;
        if min < limit {
            return Err(Error::Config(format!(
                "overlapping transducers: minimum spacing {:.4} mm < {:.4} mm",
                min * 1e3,
                limit * 1e3
            )));
        }
    }
    Ok(geometry)
}

/// The default eight-unit rig.
pub fn default_array() -> ArrayGeometry {
    build_array(ArrayConfig::default()).expect("default array configuration is valid")
}
