//! Least-squares intensity models `I = a·x + b` and `I = c·e^{a·x} + b`.
//!
//! The exponential model is linear in `(b, c)` once `a` is fixed, so `a` is
//! searched on `[-A_BOUND, A_BOUND]` with `(b, c)` solved in closed form for
//! every candidate. The best grid bracket is then refined by root-finding on the
//! profile gradient, which stays well conditioned where the residual sum itself
//! has flattened into rounding noise. `a = 0` collapses the model to a
//! constant; near-ties go to the smaller `|a|`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const A_BOUND: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Linear,
    Exponential,
}

impl FitModel {
    pub fn as_str(self) -> &'static str {
        match self {
            FitModel::Linear => "linear",
            FitModel::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub a: f64,
    pub b: f64,
    /// Exponential scale; `None` for the linear model.
    pub c: Option<f64>,
    pub r_squared: f64,
    pub sse: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        match self.c {
            None => self.a * x + self.b,
            Some(c) => c * (self.a * x).exp() + self.b,
        }
    }
}

/// `1 - SSres/SStot`; a zero-variance response counts as fully explained.
fn r_squared(points: &[(f64, f64)], sse: f64) -> f64 {
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if sst == 0.0 {
        1.0
    } else {
        1.0 - sse / sst
    }
}

fn check_points(points: &[(f64, f64)], min: usize, model: &str) -> Result<()> {
    if points.len() < min {
        return Err(Error::Fit(format!(
            "{model} fit needs at least {min} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Fit(format!("{model} fit input contains non-finite values")));
    }
    Ok(())
}

/// Ordinary least squares of `y` on `u`, returning `(slope, intercept)`; `None`
/// when `u` has no spread.
fn regress(u: impl Iterator<Item = f64> + Clone, y: &[f64]) -> Option<(f64, f64)> {
    let n = y.len() as f64;
    let mu = u.clone().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut suu, mut suy) = (0.0, 0.0);
    for (ui, yi) in u.zip(y) {
        suu += (ui - mu) * (ui - mu);
        suy += (ui - mu) * (yi - my);
    }
    if suu <= 0.0 || !suu.is_finite() {
        return None;
    }
    let slope = suy / suu;
    Some((slope, my - slope * mu))
}

pub fn fit_linear(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 2, "linear")?;
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (a, b) = regress(points.iter().map(|p| p.0), &y)
        .ok_or_else(|| Error::Fit("linear fit needs at least two distinct x values".into()))?;
    let sse = points.iter().map(|p| (p.1 - (a * p.0 + b)).powi(2)).sum();
    Ok(FitResult {
        model: FitModel::Linear,
        a,
        b,
        c: None,
        r_squared: r_squared(points, sse),
        sse,
    })
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    a: f64,
    b: f64,
    c: f64,
    sse: f64,
    /// d(sse)/da at the optimal `(b, c)` for this `a`.
    grad: f64,
}

fn profile(points: &[(f64, f64)], y: &[f64], a: f64) -> Profile {
    let (c, b) = if a == 0.0 {
        (0.0, y.iter().sum::<f64>() / y.len() as f64)
    } else {
        regress(points.iter().map(move |p| (a * p.0).exp()), y).unwrap_or((
            0.0,
            y.iter().sum::<f64>() / y.len() as f64,
        ))
    };
    let (mut sse, mut grad) = (0.0, 0.0);
    for &(x, yi) in points {
        let e = (a * x).exp();
        let r = yi - (c * e + b);
        sse += r * r;
        grad -= 2.0 * r * c * x * e;
    }
    Profile { a, b, c, sse, grad }
}

fn candidates() -> Vec<f64> {
    let mut v: Vec<f64> = (-1000..=1000).map(|k| k as f64 * (A_BOUND / 1000.0)).collect();
    // log-spaced near zero, where the linear grid is coarse relative to |a|
    for k in 0..120 {
        let m = 10f64.powf(-4.0 + k as f64 * (A_BOUND.log10() + 4.0) / 120.0);
        v.push(m);
        v.push(-m);
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Root of the profile gradient between `lo` and `hi` (opposite signs), by
/// Illinois-modified regula falsi.
fn gradient_root(points: &[(f64, f64)], y: &[f64], mut lo: Profile, mut hi: Profile) -> Profile {
    let mut side = 0i8;
    let mut best = if lo.sse <= hi.sse { lo } else { hi };
    for _ in 0..200 {
        let denom = hi.grad - lo.grad;
        let mut a = if denom != 0.0 {
            (lo.a * hi.grad - hi.a * lo.grad) / denom
        } else {
            0.5 * (lo.a + hi.a)
        };
        if !(a > lo.a.min(hi.a) && a < lo.a.max(hi.a)) {
            a = 0.5 * (lo.a + hi.a);
        }
        let p = profile(points, y, a);
        if p.sse <= best.sse {
            best = p;
        }
        if p.grad == 0.0 || (hi.a - lo.a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1e-300) {
            return p;
        }
        if p.grad.signum() == lo.grad.signum() {
            lo = p;
            if side == -1 {
                hi.grad *= 0.5;
            }
            side = -1;
        } else {
            hi = p;
            if side == 1 {
                lo.grad *= 0.5;
            }
            side = 1;
        }
    }
    best
}

pub fn fit_exponential(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 3, "exponential")?;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::Fit(
            "exponential fit needs at least three distinct x values".into(),
        ));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let grid: Vec<Profile> = candidates().into_iter().map(|a| profile(points, &y, a)).collect();

    let min_sse = grid.iter().map(|p| p.sse).fold(f64::INFINITY, f64::min);
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let tie = min_sse + 64.0 * f64::EPSILON * scale;
    let (i, _) = grid
        .iter()
        .enumerate()
        .filter(|(_, p)| p.sse <= tie)
        .min_by(|(_, p), (_, q)| p.a.abs().total_cmp(&q.a.abs()))
        .expect("grid is non-empty");

    let mut best = grid[i];
    if i == 0 || i + 1 == grid.len() {
        return Err(Error::Fit(format!(
            "exponential fit did not converge: minimum at search bound |a| = {A_BOUND}, best candidate a={}, b={}, c={}, sse={}",
            best.a, best.b, best.c, best.sse
        )));
    }
    if best.a != 0.0 && best.sse > 0.0 {
        // bracket with a sign change of the gradient on either side
        let bracket = [(grid[i - 1], best), (best, grid[i + 1])]
            .into_iter()
            .find(|(l, r)| l.grad <= 0.0 && r.grad >= 0.0);
        if let Some((l, r)) = bracket {
            let refined = gradient_root(points, &y, l, r);
            if refined.sse <= best.sse + 64.0 * f64::EPSILON * scale {
                best = refined;
            }
        }
    }
    Ok(FitResult {
        model: FitModel::Exponential,
        a: best.a,
        b: best.b,
        c: Some(best.c),
        r_squared: r_squared(points, best.sse),
        sse: best.sse,
    })
}

/// Read `(x, intensity)` pairs from CSV whose header names the columns
/// `a_am` and `intensity` (any order, extra columns ignored).
pub fn read_points_csv<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Argument("empty points file".into()))?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Argument(format!("points header lacks column `{name}`")))
    };
    let (ix, iy) = (find("a_am")?, find("intensity")?);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Argument(format!("bad number on data line {}", n + 1)))
        };
        out.push((get(ix)?, get(iy)?));
    }
    Ok(out)
}

pub fn write_points_csv<W: Write>(points: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "a_am,intensity")?;
    for (x, y) in points {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}

/// CSV with header `model,a,b,c,r_squared,sse`.
pub fn write_fits_csv<W: Write>(fits: &[FitResult], mut w: W) -> Result<()> {
    writeln!(w, "model,a,b,c,r_squared,sse")?;
    for f in fits {
        let c = f.c.map(|c| c.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{c},{},{}", f.model.as_str(), f.a, f.b, f.r_squared, f.sse)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn steps() -> impl Iterator<Item = f64> {
        (0..=10).map(|k| k as f64 / 10.0)
    }

    #[test]
    fn linear_recovers_slope() {
        let pts: Vec<_> = steps().map(|x| (x, 93.4 * x + 1.0)).collect();
        let f = fit_linear(&pts).unwrap();
        assert_abs_diff_eq!(f.a, 93.4, epsilon = 1e-9);
        assert_abs_diff_eq!(f.b, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_constant_data() {
        let pts: Vec<_> = steps().map(|x| (x, 42.0)).collect();
        let f = fit_linear(&pts).unwrap();
        assert_eq!(f.a, 0.0);
        assert_eq!(f.b, 42.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn linear_degenerate() {
        assert!(matches!(fit_linear(&[(1.0, 2.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_linear(&[(1.0, 2.0), (1.0, 3.0)]), Err(Error::Fit(_))));
        assert!(fit_linear(&[(0.0, f64::NAN), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn exponential_recovers_decay() {
        let pts: Vec<_> = steps().map(|x| (x, 2.0 * (-6.0 * x).exp() + 40.0)).collect();
        let f = fit_exponential(&pts).unwrap();
        assert_abs_diff_eq!(f.a, -6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.b, 40.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.c.unwrap(), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn exponential_constant_data_prefers_zero_rate() {
        let pts: Vec<_> = steps().map(|x| (x, 5.0)).collect();
        let f = fit_exponential(&pts).unwrap();
        assert_eq!(f.a, 0.0);
        assert_eq!(f.c, Some(0.0));
        assert_eq!(f.b, 5.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn exponential_degenerate() {
        assert!(fit_exponential(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(fit_exponential(&[(0.0, 1.0), (1.0, 2.0), (1.0, 2.5)]).is_err());
    }

    #[test]
    fn exponential_beyond_bound_reports_best() {
        let pts: Vec<_> = steps().map(|x| (x, (80.0 * x).exp())).collect();
        match fit_exponential(&pts) {
            Err(Error::Fit(msg)) => assert!(msg.contains("best candidate"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_roundtrip() {
        let pts = vec![(0.0, 1.5), (0.5, 2.25), (1.0, 3.0)];
        let mut buf = Vec::new();
        write_points_csv(&pts, &mut buf).unwrap();
        assert_eq!(read_points_csv(&buf[..]).unwrap(), pts);
        let reordered = "intensity,a_am,note\n1.5,0,x\n2.25,0.5,y\n";
        assert_eq!(read_points_csv(reordered.as_bytes()).unwrap(), pts[..2].to_vec());
        assert!(read_points_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_points_csv("a_am,intensity\n1,zz\n".as_bytes()).is_err());
    }

    #[test]
    fn fits_csv_format() {
        let pts: Vec<_> = steps().map(|x| (x, 2.0 * x)).collect();
        let mut buf = Vec::new();
        write_fits_csv(&[fit_linear(&pts).unwrap()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,a,b,c,r_squared,sse\nlinear,2,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn linear_recovery(a in -200.0f64..200.0, b in -50.0f64..50.0) {
            let pts: Vec<_> = steps().map(|x| (x, a * x + b)).collect();
            let f = fit_linear(&pts).unwrap();
            prop_assert!((f.a - a).abs() < 1e-6 && (f.b - b).abs() < 1e-6);
            prop_assert!(f.r_squared <= 1.0 && f.r_squared > 1.0 - 1e-12);
        }

        #[test]
        fn exponential_recovery(
            a in prop_oneof![-20.0f64..-0.5, 0.5f64..5.0],
            b in -50.0f64..50.0,
            c in prop_oneof![-20.0f64..-0.5, 0.5f64..20.0],
        ) {
            let pts: Vec<_> = steps().map(|x| (x, c * (a * x).exp() + b)).collect();
            let f = fit_exponential(&pts).unwrap();
            prop_assert!((f.a - a).abs() < 1e-6, "a {} vs {}", f.a, a);
            prop_assert!((f.b - b).abs() < 1e-6, "b {} vs {}", f.b, b);
            prop_assert!((f.c.unwrap() - c).abs() < 1e-6, "c {:?} vs {}", f.c, c);
            prop_assert!(f.r_squared <= 1.0 && f.r_squared > 1.0 - 1e-9);
        }
    }
}
