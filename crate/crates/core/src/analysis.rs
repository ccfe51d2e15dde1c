//! Single-bin spectral checks of rendered envelopes.
//!
//! Each probe frequency must complete an integer number of periods over the
//! series, so the probes are mutually orthogonal and project exactly. The
//! reported amplitude of a probe at `f` is the peak amplitude of the matching
//! cosine: `(2/N)·|Σ x_n e^{-j2π f n / fs}|`.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::stimulus::{cycle_angle, EnvelopeSeries, StimulusSpec};

/// Tolerance on `f·N/fs` being an integer.
const PERIOD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralComponent {
    pub frequency: f64,
    pub amplitude: f64,
    /// Phase of the matching cosine, rad.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub dc: f64,
    pub components: Vec<SpectralComponent>,
    /// RMS of the series after subtracting DC and every probed component.
    pub residual_rms: f64,
    pub mean_square: f64,
}

impl SpectrumReport {
    pub fn amplitude_at(&self, frequency: f64) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.frequency == frequency)
            .map(|c| c.amplitude)
    }

    /// `dc² + Σ A²/2 + residual² - mean square`; zero up to rounding on a
    /// conforming window.
    pub fn parseval_gap(&self) -> f64 {
        let parts = self.dc * self.dc
            + self.components.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum::<f64>()
            + self.residual_rms * self.residual_rms;
        parts - self.mean_square
    }

    /// CSV with header `kind,frequency_hz,amplitude,phase_rad`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,frequency_hz,amplitude,phase_rad")?;
        writeln!(w, "dc,0,{},0", self.dc)?;
        for c in &self.components {
            writeln!(w, "component,{},{},{}", c.frequency, c.amplitude, c.phase)?;
        }
        writeln!(w, "residual_rms,,{},", self.residual_rms)?;
        Ok(())
    }
}

impl fmt::Display for SpectrumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dc           {:.9}", self.dc)?;
        for c in &self.components {
            writeln!(f, "{:>8.3} Hz  {:.9}", c.frequency, c.amplitude)?;
        }
        write!(f, "residual rms {:.3e}", self.residual_rms)
    }
}

fn check_window(series: &EnvelopeSeries, f: f64) -> Result<()> {
    let n = series.len() as f64;
    let fs = series.sample_rate;
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Window(format!("probe frequency must be > 0, got {f} Hz")));
    }
    if f >= fs / 2.0 {
        return Err(Error::Window(format!(
            "{f} Hz is at or above the Nyquist limit of {} Hz",
            fs / 2.0
        )));
    }
    let periods = f * n / fs;
    if (periods - periods.round()).abs() > PERIOD_TOLERANCE * periods.max(1.0) {
        return Err(Error::Window(format!(
            "{f} Hz covers {periods} periods over {} samples at {fs} Hz; need an integer",
            series.len()
        )));
    }
    Ok(())
}

pub fn spectrum(series: &EnvelopeSeries, probe_freqs: &[f64]) -> Result<SpectrumReport> {
    spectrum_with(series, probe_freqs, Execution::default())
}

pub fn spectrum_with(series: &EnvelopeSeries, probe_freqs: &[f64], exec: Execution) -> Result<SpectrumReport> {
    if series.is_empty() {
        return Err(Error::Window("empty series".into()));
    }
    if !(series.sample_rate.is_finite() && series.sample_rate > 0.0) {
        return Err(Error::Window(format!("sample rate must be > 0, got {}", series.sample_rate)));
    }
    for (i, &f) in probe_freqs.iter().enumerate() {
        check_window(series, f)?;
        if probe_freqs[..i].contains(&f) {
            return Err(Error::Window(format!("{f} Hz probed twice")));
        }
    }
    let n = series.len() as f64;
    let fs = series.sample_rate;
    let dc = series.samples.iter().sum::<f64>() / n;

    let components = par::map_slice(exec, probe_freqs, |&f| {
        let acc: Complex64 = series
            .samples
            .iter()
            .enumerate()
            .map(|(k, &x)| x * Complex64::from_polar(1.0, -cycle_angle(f, k as f64 / fs)))
            .sum();
        let z = acc * (2.0 / n);
        SpectralComponent {
            frequency: f,
            amplitude: z.norm(),
            phase: z.arg(),
        }
    });

    let mut residual = 0.0;
    let mut mean_square = 0.0;
    for (k, &x) in series.samples.iter().enumerate() {
        let t = k as f64 / fs;
        let model = dc
            + components
                .iter()
                .map(|c| c.amplitude * (cycle_angle(c.frequency, t) + c.phase).cos())
                .sum::<f64>();
        residual += (x - model).powi(2);
        mean_square += x * x;
    }
    Ok(SpectrumReport {
        dc,
        components,
        residual_rms: (residual / n).sqrt(),
        mean_square: mean_square / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
    /// Set when the series could not be analysed at all.
    pub error: Option<String>,
    pub spectrum: Option<SpectrumReport>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for EnvelopeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(e) = &self.error {
            writeln!(f, "FAIL  {e}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "{}  {:<14} expected {:.9}  measured {:.9}  |diff| {:.3e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.expected,
                c.measured,
                (c.measured - c.expected).abs()
            )?;
        }
        write!(
            f,
            "{} (tol {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.tolerance
        )
    }
}

/// Compare a rendered series against the DC level and per-tone amplitudes its
/// stimulus definition implies, plus a residual bound.
pub fn verify_envelope(spec: &StimulusSpec, series: &EnvelopeSeries, tol: f64) -> EnvelopeReport {
    let depth = spec.a_am * spec.a_max / 2.0;
    let mut expected = vec![("dc".to_string(), spec.a_max * (1.0 - spec.a_am / 2.0))];
    let mut probes = vec![spec.f_am1];
    if spec.f_am2 != spec.f_am1 {
        probes.push(spec.f_am2);
        expected.push((format!("{} Hz", spec.f_am1), depth * spec.lambda));
        expected.push((format!("{} Hz", spec.f_am2), depth * (1.0 - spec.lambda)));
    } else {
        expected.push((format!("{} Hz", spec.f_am1), depth));
    }
    expected.push(("residual rms".to_string(), 0.0));

    let report = match spectrum(series, &probes) {
        Ok(r) => r,
        Err(e) => {
            return EnvelopeReport {
                tolerance: tol,
                checks: Vec::new(),
                error: Some(e.to_string()),
                spectrum: None,
            }
        }
    };
    let measured = std::iter::once(report.dc)
        .chain(report.components.iter().map(|c| c.amplitude))
        .chain(std::iter::once(report.residual_rms));
    let checks = expected
        .into_iter()
        .zip(measured)
        .map(|((name, expected), measured)| Check {
            pass: (measured - expected).abs() <= tol,
            name,
            expected,
            measured,
        })
        .collect();
    EnvelopeReport {
        tolerance: tol,
        checks,
        error: None,
        spectrum: Some(report),
    }
}
