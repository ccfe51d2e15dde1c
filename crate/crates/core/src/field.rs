//! Far-field acoustic pressure of a driven array, grid sampling, focal metrics
//! and a radiation-force estimate.
//!
//! Each transducer is a baffled circular piston:
//! `p = P0 · Σ a_t · D(θ_t) / d_t · e^{j(k d_t + φ_t)} · e^{-α d_t}`
//! with `D(θ) = 2 J1(ka sinθ) / (ka sinθ)`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Medium, Vec3};
use crate::par::{self, Execution};
use crate::synthesis::{DriveFrame, COINCIDENCE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationModel {
    /// m
    pub piston_radius: f64,
    /// Amplitude attenuation, Np/m.
    pub absorption: f64,
    /// Pressure amplitude (Pa) produced on-axis at 1 m by one transducer at
    /// full drive. Relative units when left at 1.
    pub p0: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            piston_radius: 4.5e-3,
            absorption: 0.0,
            p0: 1.0,
        }
    }
}

impl PropagationModel {
    /// Default model calibrated to absolute pascals; see [`CALIBRATED_P0`].
    pub fn calibrated() -> Self {
        Self {
            p0: CALIBRATED_P0,
            ..Self::default()
        }
    }
}

/// Force anchor for absolute calibration: one full-drive focus 0.2 m above
/// the default array pushes a 1 cm² reflecting patch with 20 mN.
pub const CALIBRATION_FORCE: f64 = 0.02;
pub const CALIBRATION_AREA: f64 = 1e-4;
pub const CALIBRATION_HEIGHT: f64 = 0.2;

/// `P0` (Pa at 1 m per transducer) meeting the calibration anchor with the
/// default array and medium; [`calibrate_p0`] reproduces it.
pub const CALIBRATED_P0: f64 = 1.006_557_101_846_156_5;

/// `P0` for which a single full-drive focus at `focus` yields `force` on a
/// totally reflecting patch of `area` under `model`'s directivity and
/// absorption.
pub fn calibrate_p0(
    geometry: &ArrayGeometry,
    model: &PropagationModel,
    focus: Vec3,
    force: f64,
    area: f64,
) -> Result<f64> {
    let relative = PropagationModel { p0: 1.0, ..*model };
    let drive = crate::synthesis::drive_for_frame(
        geometry,
        &crate::stimulus::FociFrame {
            time: 0.0,
            foci: vec![focus],
            amplitude: 1.0,
        },
        crate::synthesis::SynthesisMode::Superposition,
    )?;
    let p = pressure_at_with(geometry, &relative, &drive, focus)?.norm();
    if !(force >= 0.0) || !(area > 0.0) || p == 0.0 {
        return Err(Error::Argument(format!(
            "cannot calibrate to force {force} N with focal pressure {p}"
        )));
    }
    let target = (force * geometry.medium().rho_c2() / (2.0 * area)).sqrt();
    Ok(target / p)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        // power series; at |x| < 8 the largest term is ~1e2, so cancellation
        // costs at most two digits
        let half = 0.5 * x;
        let q = -half * half;
        let mut term = half;
        let mut sum = term;
        let mut m = 0.0;
        loop {
            m += 1.0;
            term *= q / (m * (m + 1.0));
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        // Hankel asymptotic expansion (rational fit)
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356194491;
        let p = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * (-0.240337019e-6))));
        let q = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        let ans = (0.636619772 / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q);
        if x < 0.0 {
            -ans
        } else {
            ans
        }
    }
}

/// Piston directivity `2 J1(x) / x` with `x = ka·sinθ`.
pub fn piston_directivity(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 8.0 + x2 * x2 / 192.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}

fn check_drive(geometry: &ArrayGeometry, drive: &DriveFrame) -> Result<()> {
    if drive.amplitudes.len() != geometry.len() || drive.phases.len() != geometry.len() {
        return Err(Error::Argument(format!(
            "drive frame has {} amplitudes / {} phases for {} transducers",
            drive.amplitudes.len(),
            drive.phases.len(),
            geometry.len()
        )));
    }
    Ok(())
}

fn pressure_unchecked(
    geometry: &ArrayGeometry,
    model: &PropagationModel,
    drive: &DriveFrame,
    point: &Vec3,
) -> Result<Complex64> {
    let k = geometry.medium().wavenumber();
    let ka = k * model.piston_radius;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, pose) in geometry.poses().iter().enumerate() {
        let amp = drive.amplitudes[i];
        let r = point - pose.position;
        let d = r.norm();
        if d < COINCIDENCE_TOLERANCE {
            return Err(Error::Singularity {
                transducer: i,
                x: point.x,
                y: point.y,
                z: point.z,
            });
        }
        if amp == 0.0 {
            continue;
        }
        let sin_theta = (pose.normal.cross(&r).norm() / d).min(1.0);
        let mut mag = amp * piston_directivity(ka * sin_theta) / d;
        if model.absorption != 0.0 {
            mag *= (-model.absorption * d).exp();
        }
        acc += Complex64::from_polar(mag, k * d + drive.phases[i]);
    }
    Ok(acc * model.p0)
}

pub fn pressure_at(geometry: &ArrayGeometry, drive: &DriveFrame, point: Vec3) -> Result<Complex64> {
    pressure_at_with(geometry, &PropagationModel::default(), drive, point)
}

pub fn pressure_at_with(
    geometry: &ArrayGeometry,
    model: &PropagationModel,
    drive: &DriveFrame,
    point: Vec3,
) -> Result<Complex64> {
    check_drive(geometry, drive)?;
    pressure_unchecked(geometry, model, drive, &point)
}

/// Magnitude a perfectly focused drive reaches at `point`:
/// `P0 · Σ a_t D(θ_t) / d_t · e^{-α d_t}`.
pub fn coherent_sum(
    geometry: &ArrayGeometry,
    model: &PropagationModel,
    amplitudes: &[f64],
    point: Vec3,
) -> f64 {
    let ka = geometry.medium().wavenumber() * model.piston_radius;
    geometry
        .poses()
        .iter()
        .zip(amplitudes)
        .map(|(pose, a)| {
            let r = point - pose.position;
            let d = r.norm();
            let sin_theta = (pose.normal.cross(&r).norm() / d).min(1.0);
            a * piston_directivity(ka * sin_theta) / d * (-model.absorption * d).exp()
        })
        .sum::<f64>()
        * model.p0
}

/// Rectangular sampling plane. Sample `(i, j)` sits at
/// `origin + u·i·extent.0/(nu-1) + v·j·extent.1/(nv-1)`; storage is row-major
/// with `j` as the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    /// m
    pub extent: (f64, f64),
    pub resolution: (usize, usize),
}

impl GridSpec {
    pub fn new(
        origin: Vec3,
        u_axis: Vec3,
        v_axis: Vec3,
        extent: (f64, f64),
        resolution: (usize, usize),
    ) -> Result<Self> {
        let g = Self {
            origin,
            u_axis,
            v_axis,
            extent,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with its middle sample at `center`.
    pub fn centered(
        center: Vec3,
        u_axis: Vec3,
        v_axis: Vec3,
        extent: (f64, f64),
        resolution: (usize, usize),
    ) -> Result<Self> {
        let origin = center - u_axis * (extent.0 / 2.0) - v_axis * (extent.1 / 2.0);
        Self::new(origin, u_axis, v_axis, extent, resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-9;
        if (self.u_axis.norm() - 1.0).abs() > tol
            || (self.v_axis.norm() - 1.0).abs() > tol
            || self.u_axis.dot(&self.v_axis).abs() > tol
        {
            return Err(Error::Argument("grid axes must be orthonormal".into()));
        }
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::Argument(format!(
                "grid resolution must be at least 2x2, got {}x{}",
                self.resolution.0, self.resolution.1
            )));
        }
        if !(self.extent.0 > 0.0 && self.extent.1 > 0.0)
            || !self.extent.0.is_finite()
            || !self.extent.1.is_finite()
        {
            return Err(Error::Argument("grid extent must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.resolution.0 * self.resolution.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> (f64, f64) {
        (
            self.extent.0 / (self.resolution.0 - 1) as f64,
            self.extent.1 / (self.resolution.1 - 1) as f64,
        )
    }

    /// In-plane coordinates of sample `(i, j)` relative to the origin.
    pub fn uv(&self, i: usize, j: usize) -> (f64, f64) {
        (
            i as f64 * self.extent.0 / (self.resolution.0 - 1) as f64,
            j as f64 * self.extent.1 / (self.resolution.1 - 1) as f64,
        )
    }

    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        let (u, v) = self.uv(i, j);
        self.origin + self.u_axis * u + self.v_axis * v
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.resolution.0 + i
    }

    /// Project `p` onto the plane: `(u, v)` relative to the origin.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        let r = p - self.origin;
        (r.dot(&self.u_axis), r.dot(&self.v_axis))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: GridSpec,
    pub pressure: Vec<Complex64>,
    /// Wavelength of the simulated carrier, m.
    pub wavelength: f64,
}

pub fn field_map(geometry: &ArrayGeometry, drive: &DriveFrame, grid: &GridSpec) -> Result<FieldMap> {
    field_map_with(geometry, &PropagationModel::default(), drive, grid, Execution::default())
}

/// Evaluate the pressure at every grid sample. Each sample is an independent
/// sequential sum, so the result is identical for any `exec`.
pub fn field_map_with(
    geometry: &ArrayGeometry,
    model: &PropagationModel,
    drive: &DriveFrame,
    grid: &GridSpec,
    exec: Execution,
) -> Result<FieldMap> {
    grid.validate()?;
    check_drive(geometry, drive)?;
    let nu = grid.resolution.0;
    let pressure = par::try_map_range(exec, grid.len(), |idx| {
        let p = grid.point(idx % nu, idx / nu);
        pressure_unchecked(geometry, model, drive, &p)
    })?;
    Ok(FieldMap {
        grid: *grid,
        pressure,
        wavelength: geometry.medium().wavelength(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMaximum {
    pub i: usize,
    pub j: usize,
    pub position: Vec3,
    pub magnitude: f64,
}

impl FieldMap {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.pressure.iter().map(|c| c.norm()).collect()
    }

    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.pressure[self.grid.index(i, j)].norm()
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.pressure.iter().map(|c| c.norm()).sum::<f64>() / self.pressure.len() as f64
    }

    /// `(i, j, |p|)` of the largest magnitude; first occurrence on ties.
    pub fn global_max(&self) -> (usize, usize, f64) {
        let nu = self.grid.resolution.0;
        let (idx, mag) = self
            .pressure
            .iter()
            .map(|c| c.norm())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (i, m) } else { best });
        (idx % nu, idx / nu, mag)
    }

    /// Interior samples strictly larger than all eight neighbours, in
    /// decreasing magnitude order.
    pub fn local_maxima(&self) -> Vec<LocalMaximum> {
        let (nu, nv) = self.grid.resolution;
        let mag = self.magnitudes();
        let mut out = Vec::new();
        for j in 1..nv.saturating_sub(1) {
            for i in 1..nu.saturating_sub(1) {
                let m = mag[j * nu + i];
                let is_peak = (-1i64..=1).all(|dj| {
                    (-1i64..=1).all(|di| {
                        if di == 0 && dj == 0 {
                            return true;
                        }
                        let n = (j as i64 + dj) as usize * nu + (i as i64 + di) as usize;
                        m > mag[n]
                    })
                });
                if is_peak {
                    out.push(LocalMaximum {
                        i,
                        j,
                        position: self.grid.point(i, j),
                        magnitude: m,
                    });
                }
            }
        }
        out.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        out
    }

    /// CSV with header `u,v,re,im,abs`; `u`, `v` in metres from the grid origin.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v,re,im,abs")?;
        let (nu, nv) = self.grid.resolution;
        for j in 0..nv {
            for i in 0..nu {
                let (u, v) = self.grid.uv(i, j);
                let p = self.pressure[self.grid.index(i, j)];
                writeln!(w, "{u},{v},{},{},{}", p.re, p.im, p.norm())?;
            }
        }
        Ok(())
    }

    /// Binary 16-bit PGM of `|p| / max|p|`; an all-zero field maps to black.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let (nu, nv) = self.grid.resolution;
        write!(w, "P5\n{nu} {nv}\n65535\n")?;
        let mag = self.magnitudes();
        let max = mag.iter().cloned().fold(0.0, f64::max);
        let mut buf = Vec::with_capacity(mag.len() * 2);
        for m in mag {
            let v = if max > 0.0 {
                (m / max * 65535.0).round() as u16
            } else {
                0
            };
            buf.extend_from_slice(&v.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FocalReport {
    Focused {
        peak_magnitude: f64,
        peak_position: Vec3,
        /// Distance from the peak sample to the target, m.
        offset: f64,
        peak_to_mean: f64,
    },
    /// No local maximum within three wavelengths of the target.
    NotFocused,
}

impl FocalReport {
    pub fn is_focused(&self) -> bool {
        matches!(self, FocalReport::Focused { .. })
    }

    pub fn offset(&self) -> Option<f64> {
        match self {
            FocalReport::Focused { offset, .. } => Some(*offset),
            FocalReport::NotFocused => None,
        }
    }

    pub fn peak_position(&self) -> Option<Vec3> {
        match self {
            FocalReport::Focused { peak_position, .. } => Some(*peak_position),
            FocalReport::NotFocused => None,
        }
    }
}

/// Nearest local maximum to each target, within three wavelengths.
pub fn focal_metrics(map: &FieldMap, targets: &[Vec3]) -> Result<Vec<FocalReport>> {
    let slack = 1e-9;
    for t in targets {
        let (u, v) = map.grid.project(t);
        if u < -slack || v < -slack || u > map.grid.extent.0 + slack || v > map.grid.extent.1 + slack {
            return Err(Error::Argument(format!(
                "target ({:.4}, {:.4}, {:.4}) lies outside the grid extent",
                t.x, t.y, t.z
            )));
        }
    }
    let maxima = map.local_maxima();
    let mean = map.mean_magnitude();
    let radius = 3.0 * map.wavelength;
    Ok(targets
        .iter()
        .map(|t| {
            maxima
                .iter()
                .map(|m| (m, (m.position - t).norm()))
                .filter(|(_, d)| *d <= radius)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(FocalReport::NotFocused, |(m, d)| FocalReport::Focused {
                    peak_magnitude: m.magnitude,
                    peak_position: m.position,
                    offset: d,
                    peak_to_mean: if mean > 0.0 { m.magnitude / mean } else { f64::INFINITY },
                })
        })
        .collect())
}

/// Radiation force on a totally reflecting patch: `F = 2 p² S / (ρ c²)`.
pub fn radiation_force(pressure_amplitude: f64, area: f64, medium: &Medium) -> Result<f64> {
    if !(pressure_amplitude >= 0.0) {
        return Err(Error::Argument(format!(
            "pressure amplitude must be >= 0, got {pressure_amplitude}"
        )));
    }
    if !(area > 0.0) {
        return Err(Error::Argument(format!("area must be > 0, got {area}")));
    }
    Ok(2.0 * pressure_amplitude * pressure_amplitude * area / medium.rho_c2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_array, default_array, ArrayConfig, UnitLayout};
    use crate::synthesis::{drive_for_frame, phases_for_focus, SynthesisMode};
    use crate::stimulus::FociFrame;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::Matrix4;

    fn one() -> ArrayGeometry {
        build_array(ArrayConfig::single_transducer(Medium::default())).unwrap()
    }

    fn uniform(n: usize, a: f64) -> DriveFrame {
        DriveFrame {
            time: 0.0,
            amplitudes: vec![a; n],
            phases: vec![0.0; n],
        }
    }

    #[test]
    fn j1_reference_values() {
        // tabulated J1
        assert_abs_diff_eq!(bessel_j1(0.0), 0.0);
        assert_abs_diff_eq!(bessel_j1(1.0), 0.440_050_585_744_933_5, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j1(2.0), 0.576_724_807_756_873_4, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j1(3.8317059702075125), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j1(5.0), -0.327_579_137_591_465_2, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j1(10.0), 0.043_472_746_168_861_44, epsilon = 1e-7);
        assert_abs_diff_eq!(bessel_j1(-2.0), -bessel_j1(2.0));
    }

    #[test]
    fn directivity_limits() {
        assert_eq!(piston_directivity(0.0), 1.0);
        let small = 9.9e-5;
        let big = 1.01e-4;
        assert_abs_diff_eq!(piston_directivity(small), piston_directivity(big), epsilon = 1e-8);
        assert!(piston_directivity(3.0) < 1.0);
    }

    #[test]
    fn zero_drive_zero_pressure() {
        let g = default_array();
        let p = pressure_at(&g, &uniform(g.len(), 0.0), Vec3::new(0.0, 0.2, 0.0)).unwrap();
        assert_eq!(p, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn two_equidistant_sources_double() {
        let medium = Medium::default();
        let cfg = ArrayConfig {
            layout: UnitLayout {
                cols: 2,
                rows: 1,
                gaps: vec![],
            },
            pitch: 0.02,
            unit_transforms: vec![Matrix4::new_translation(&Vec3::new(-0.01, 0.0, 0.0))],
            medium,
        };
        let pair = build_array(cfg).unwrap();
        let point = Vec3::new(0.0, 0.1, 0.0);
        let p2 = pressure_at(&pair, &uniform(2, 1.0), point).unwrap().norm();
        let single = build_array(ArrayConfig {
            unit_transforms: vec![Matrix4::new_translation(&Vec3::new(-0.01, 0.0, 0.0))],
            layout: UnitLayout::single(),
            ..ArrayConfig::single_transducer(medium)
        })
        .unwrap();
        let p1 = pressure_at(&single, &uniform(1, 1.0), point).unwrap().norm();
        assert_relative_eq!(p2, 2.0 * p1, max_relative = 1e-12);
    }

    #[test]
    fn inverse_distance_on_axis() {
        let g = one();
        let d = uniform(1, 1.0);
        let a = pressure_at(&g, &d, Vec3::new(0.0, 0.1, 0.0)).unwrap().norm();
        let b = pressure_at(&g, &d, Vec3::new(0.0, 0.2, 0.0)).unwrap().norm();
        assert_relative_eq!(b, a / 2.0, max_relative = 1e-9);
        assert_relative_eq!(a, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn absorption_attenuates() {
        let g = one();
        let model = PropagationModel {
            absorption: 0.1,
            ..PropagationModel::default()
        };
        let d = uniform(1, 1.0);
        let p = pressure_at_with(&g, &model, &d, Vec3::new(0.0, 1.0, 0.0)).unwrap().norm();
        assert_relative_eq!(p, (-0.1f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn coincident_point_is_singular() {
        let g = one();
        assert!(matches!(
            pressure_at(&g, &uniform(1, 1.0), Vec3::zeros()),
            Err(Error::Singularity { .. })
        ));
        let grid = GridSpec::centered(Vec3::zeros(), Vec3::x(), Vec3::z(), (0.02, 0.02), (3, 3)).unwrap();
        let err = field_map(&g, &uniform(1, 1.0), &grid).unwrap_err();
        assert!(err.to_string().contains("(0.000000, 0.000000, 0.000000)"), "{err}");
    }

    #[test]
    fn mismatched_drive_rejected() {
        let g = default_array();
        assert!(matches!(
            pressure_at(&g, &uniform(3, 1.0), Vec3::y()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn focused_drive_matches_coherent_sum() {
        let g = default_array();
        let focus = Vec3::new(0.02, 0.18, -0.01);
        let drive = DriveFrame {
            time: 0.0,
            amplitudes: vec![1.0; g.len()],
            phases: phases_for_focus(&g, focus).unwrap(),
        };
        let model = PropagationModel::default();
        let p = pressure_at(&g, &drive, focus).unwrap().norm();
        let closed = coherent_sum(&g, &model, &drive.amplitudes, focus);
        assert_relative_eq!(p, closed, max_relative = 1e-3);
        assert_relative_eq!(p, closed, max_relative = 1e-9);
    }

    #[test]
    fn grid_of_four_matches_pointwise() {
        let g = default_array();
        let drive = drive_for_frame(
            &g,
            &FociFrame {
                time: 0.0,
                foci: vec![Vec3::new(0.0, 0.2, 0.0)],
                amplitude: 1.0,
            },
            SynthesisMode::Superposition,
        )
        .unwrap();
        let grid = GridSpec::new(Vec3::new(-0.01, 0.2, -0.01), Vec3::x(), Vec3::z(), (0.02, 0.02), (2, 2)).unwrap();
        let map = field_map(&g, &drive, &grid).unwrap();
        assert_eq!(map.pressure.len(), 4);
        for j in 0..2 {
            for i in 0..2 {
                assert_eq!(map.pressure[grid.index(i, j)], pressure_at(&g, &drive, grid.point(i, j)).unwrap());
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(Vec3::zeros(), Vec3::x(), Vec3::x(), (1.0, 1.0), (3, 3)).is_err());
        assert!(GridSpec::new(Vec3::zeros(), Vec3::x(), Vec3::z(), (1.0, 1.0), (1, 3)).is_err());
        assert!(GridSpec::new(Vec3::zeros(), Vec3::x() * 2.0, Vec3::z(), (1.0, 1.0), (3, 3)).is_err());
    }

    #[test]
    fn zero_field_not_focused() {
        let grid = GridSpec::centered(Vec3::new(0.0, 0.2, 0.0), Vec3::x(), Vec3::z(), (0.02, 0.02), (5, 5)).unwrap();
        let map = FieldMap {
            grid,
            pressure: vec![Complex64::new(0.0, 0.0); 25],
            wavelength: 0.00865,
        };
        let r = focal_metrics(&map, &[Vec3::new(0.0, 0.2, 0.0)]).unwrap();
        assert_eq!(r, vec![FocalReport::NotFocused]);
        assert!(focal_metrics(&map, &[Vec3::new(1.0, 0.2, 0.0)]).is_err());
    }

    #[test]
    fn force_law() {
        let m = Medium::default();
        assert_eq!(radiation_force(0.0, 1e-4, &m).unwrap(), 0.0);
        let f1 = radiation_force(1000.0, 1e-4, &m).unwrap();
        let f2 = radiation_force(2000.0, 1e-4, &m).unwrap();
        assert_eq!(f2, 4.0 * f1);
        assert_relative_eq!(f1, 2.0 * 1e6 * 1e-4 / (1.184 * 346.0 * 346.0), max_relative = 1e-15);
        assert!(radiation_force(-1.0, 1e-4, &m).is_err());
        assert!(radiation_force(1.0, 0.0, &m).is_err());
    }

    #[test]
    fn pgm_header_and_size() {
        let grid = GridSpec::centered(Vec3::new(0.0, 0.2, 0.0), Vec3::x(), Vec3::z(), (0.02, 0.01), (4, 3)).unwrap();
        let map = FieldMap {
            grid,
            pressure: (0..12).map(|i| Complex64::new(i as f64, 0.0)).collect(),
            wavelength: 0.00865,
        };
        let mut buf = Vec::new();
        map.write_pgm(&mut buf).unwrap();
        let header = b"P5\n4 3\n65535\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 24);
        assert_eq!(&buf[buf.len() - 2..], &[0xff, 0xff]);
        let mut csv = Vec::new();
        map.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("u,v,re,im,abs\n"));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn calibration_constant_reproduces_anchor() {
        let g = default_array();
        let focus = Vec3::new(0.0, CALIBRATION_HEIGHT, 0.0);
        let p0 = calibrate_p0(&g, &PropagationModel::default(), focus, CALIBRATION_FORCE, CALIBRATION_AREA).unwrap();
        assert_relative_eq!(p0, CALIBRATED_P0, max_relative = 1e-12);
        // a quarter of the force needs half the source strength
        let half = calibrate_p0(&g, &PropagationModel::default(), focus, CALIBRATION_FORCE / 4.0, CALIBRATION_AREA).unwrap();
        assert_relative_eq!(half, p0 / 2.0, max_relative = 1e-12);
        assert!(calibrate_p0(&g, &PropagationModel::default(), focus, -1.0, CALIBRATION_AREA).is_err());
    }
}
