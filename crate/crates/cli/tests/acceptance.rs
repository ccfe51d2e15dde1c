//! Acceptance criteria, run in order. Each prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use umh_core::analysis::spectrum;
use umh_core::field::{
    coherent_sum, field_map_with, pressure_at_with, radiation_force, GridSpec, PropagationModel,
};
use umh_core::geometry::{default_array, Vec3};
use umh_core::par::Execution;
use umh_core::psychophys::fit::{fit_exponential, fit_linear};
use umh_core::psychophys::{run_observer, Interleave, ObserverModel};
use umh_core::session::{run_stroke_session, udf, DriveLog, SessionConfig};
use umh_core::stimulus::{preset, render_stimulus, trajectory_at, EnvelopeSeries, FociFrame};
use umh_core::synthesis::{drive_for_frame, stream_drive_with, SynthesisMode, SynthesisOptions};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_presets() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_umh"))
        .arg("presets")
        .output()
        .map_err(|e| format!("cannot run umh: {e}"))?;
    if !out.status.success() {
        return Err(format!("umh presets exited with {}", out.status));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines().skip_while(|l| !l.starts_with("# all parameters")).skip(1);
    let header: Vec<&str> = lines.next().ok_or("missing table header")?.split_whitespace().collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no `{name}` column"));
    let (name_col, lambda_col, a_am_col) = (col("name")?, col("lambda")?, col("a_am")?);
    let rows: Vec<Vec<&str>> = lines
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect();
    let cell = |name: &str, c: usize| -> Result<String, String> {
        rows.iter()
            .find(|r| r[name_col] == name)
            .map(|r| r[c].to_string())
            .ok_or(format!("preset {name} missing"))
    };

    let table_lambda = [("S-30Hz", 1.0), ("S-150Hz", 0.0), ("S-Mix1", 0.5), ("S-Mix2", 0.7)];
    let table_a_am = [
        ("S-LM", 0.0),
        ("S-30Hz-w", 0.5),
        ("S-30Hz-s", 1.0),
        ("S-150Hz-w", 0.3),
        ("S-150Hz-s", 1.0),
        ("S-Mix2", 1.0),
    ];
    let mut bad = Vec::new();
    for (name, want) in table_lambda {
        let got = cell(name, lambda_col)?;
        if got.parse::<f64>().ok() != Some(want) {
            bad.push(format!("{name} lambda {got} != {want}"));
        }
    }
    if cell("S-LM", lambda_col)? != "-" {
        bad.push("S-LM lambda is not `-`".into());
    }
    for (name, want) in table_a_am {
        let got = cell(name, a_am_col)?;
        if got.parse::<f64>().ok() != Some(want) {
            bad.push(format!("{name} a_am {got} != {want}"));
        }
    }
    check(
        bad.is_empty() && rows.len() == 9,
        if bad.is_empty() {
            format!("{} presets; 4 lambda and 6 A^AM values exact", rows.len())
        } else {
            bad.join("; ")
        },
    )
}

fn c2_spectrum() -> Outcome {
    let tol = 1e-6;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, want) in [("S-Mix1", [0.5, 0.25, 0.25]), ("S-Mix2", [0.5, 0.35, 0.15])] {
        let series = EnvelopeSeries::render(&preset(name).unwrap(), 1000.0).map_err(|e| e.to_string())?;
        let s = spectrum(&series, &[30.0, 150.0]).map_err(|e| e.to_string())?;
        let got = [s.dc, s.amplitude_at(30.0).unwrap(), s.amplitude_at(150.0).unwrap()];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
        parts.push(format!("{name} ({:.9}, {:.9}, {:.9})", got[0], got[1], got[2]));
    }
    check(worst <= tol, format!("{}; max error {worst:.2e} (tol {tol:.0e})", parts.join(", ")))
}

fn c3_trajectory() -> Outcome {
    let spec = preset("S-LM").unwrap();
    let center = Vec3::new(0.0, 0.2, 0.0);
    let (r, d, period) = (3.3e-3, 1e-3, 0.2);
    let (mut radius_err, mut chord_err, mut period_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..=2000 {
        let t = k as f64 * 1e-3;
        let foci = trajectory_at(&spec, center, t).map_err(|e| e.to_string())?;
        let later = trajectory_at(&spec, center, t + period).map_err(|e| e.to_string())?;
        for (i, f) in foci.iter().enumerate() {
            radius_err = radius_err.max(((f - center).norm() - r).abs());
            period_err = period_err.max((f - later[i]).norm());
            if i > 0 {
                chord_err = chord_err.max(((f - foci[i - 1]).norm() - d).abs());
            }
        }
    }
    let tol = 1e-12;
    check(
        radius_err <= tol && chord_err <= tol && period_err <= tol,
        format!(
            "max |r - 3.3 mm| {radius_err:.2e} m, |chord - 1 mm| {chord_err:.2e} m, \
             0.2 s repeat {period_err:.2e} m (tol {tol:.0e})"
        ),
    )
}

fn c4_focusing() -> Outcome {
    let geometry = default_array();
    let model = PropagationModel::default();
    let focus = Vec3::new(0.0, 0.2, 0.0);
    let lambda = geometry.medium().wavelength();

    let single = FociFrame {
        time: 0.0,
        foci: vec![focus],
        amplitude: 1.0,
    };
    let drive = drive_for_frame(&geometry, &single, SynthesisMode::Superposition).map_err(|e| e.to_string())?;
    let simulated = pressure_at_with(&geometry, &model, &drive, focus).map_err(|e| e.to_string())?.norm();
    let closed = coherent_sum(&geometry, &model, &drive.amplitudes, focus);
    let rel = (simulated / closed - 1.0).abs();

    let grid = GridSpec::centered(focus, Vec3::x(), Vec3::z(), (0.1, 0.1), (101, 101)).unwrap();
    let map = field_map_with(&geometry, &model, &drive, &grid, Execution::default()).map_err(|e| e.to_string())?;
    let (gi, gj, _) = map.global_max();
    let focus_is_max = (gi, gj) == (50, 50);

    let lm = render_stimulus(&preset("S-LM").unwrap(), focus, 1000.0).map_err(|e| e.to_string())?;
    let frame = &lm[0];
    let drive = drive_for_frame(&geometry, frame, SynthesisMode::Superposition).map_err(|e| e.to_string())?;
    let map = field_map_with(&geometry, &model, &drive, &grid, Execution::default()).map_err(|e| e.to_string())?;
    let maxima = map.local_maxima();
    let near: Vec<_> = maxima
        .iter()
        .filter(|m| frame.foci.iter().any(|f| (m.position - f).norm() <= lambda))
        .collect();
    // Each commanded focus needs its own maximum: greedy one-to-one matching.
    let mut used = vec![false; near.len()];
    let mut matched = 0;
    for f in &frame.foci {
        let best = near
            .iter()
            .enumerate()
            .filter(|(k, m)| !used[*k] && (m.position - f).norm() <= lambda)
            .min_by(|a, b| (a.1.position - f).norm().total_cmp(&(b.1.position - f).norm()));
        if let Some((k, _)) = best {
            used[k] = true;
            matched += 1;
        }
    }

    let ok = rel <= 1e-3 && focus_is_max && matched == 5;
    check(
        ok,
        format!(
            "single focus |p| vs closed form {rel:.2e} (tol 1e-3), global max at pixel ({gi}, {gj}) \
             {}; 5-foci LM frame: {matched}/5 foci matched to distinct maxima within {:.2} mm \
             ({} maxima within one wavelength of any focus)",
            if focus_is_max { "= focus" } else { "!= focus (50, 50)" },
            lambda * 1e3,
            near.len()
        ),
    )
}

fn c5_force() -> Outcome {
    let geometry = default_array();
    let medium = *geometry.medium();
    let model = PropagationModel::calibrated();
    let focus = Vec3::new(0.0, 0.2, 0.0);
    let frame = FociFrame {
        time: 0.0,
        foci: vec![focus],
        amplitude: 1.0,
    };
    let drive = drive_for_frame(&geometry, &frame, SynthesisMode::Superposition).map_err(|e| e.to_string())?;
    let p = pressure_at_with(&geometry, &model, &drive, focus).map_err(|e| e.to_string())?.norm();
    let area = 1e-4;
    let f1 = radiation_force(p, area, &medium).map_err(|e| e.to_string())?;
    let f2 = radiation_force(2.0 * p, area, &medium).map_err(|e| e.to_string())?;
    let quadratic = f2 == 4.0 * f1;
    let in_decade = (0.010..=0.100).contains(&f1);
    check(
        quadratic && in_decade,
        format!(
            "|p| = {p:.1} Pa, F = {:.3} mN on 1 cm^2 (decade 10-100 mN), F(2p)/F(p) = {}",
            f1 * 1e3,
            f2 / f1
        ),
    )
}

fn c6_session() -> Outcome {
    let geometry = default_array();
    let config = SessionConfig::default();
    let spec = preset("S-Mix2").unwrap();
    let log = run_stroke_session(&geometry, &config, &spec).map_err(|e| e.to_string())?;
    let want_duration = 0.07 / 0.018;
    let frames = log.drive.frames.len() as i64;
    let ticks = log.tracking_events.len() as i64;

    // Recover p^c from each frame by subtracting the trajectory offsets, then
    // require it to be constant within a tick interval and equal to that tick.
    let mut worst: f64 = 0.0;
    let mut prev_tick = None;
    let mut prev_center = Vec3::zeros();
    let mut intervals = 0;
    for f in &log.foci_frames {
        let offsets = trajectory_at(&spec, Vec3::zeros(), f.time).map_err(|e| e.to_string())?;
        let center = f.foci[0] - offsets[0];
        let m = (f.time * config.tracking_rate + 1e-9).floor() as usize;
        let tick_center = log.tracking_events[m].center.ok_or("frame emitted without contact")?;
        worst = worst.max((center - tick_center).norm());
        if prev_tick == Some(m) {
            worst = worst.max((center - prev_center).norm());
        } else {
            intervals += 1;
        }
        prev_tick = Some(m);
        prev_center = center;
    }
    let ok = (log.duration - want_duration).abs() <= 1e-12
        && (frames - 3888).abs() <= 1
        && (ticks - 350).abs() <= 1
        && worst <= 1e-12;
    check(
        ok,
        format!(
            "duration {:.6} s, {frames} frames, {ticks} tracking events, \
             {intervals} tick intervals with max p^c deviation {worst:.2e} m",
            log.duration
        ),
    )
}

fn c7_staircase() -> Outcome {
    let bound = 0.02;
    let run = |threshold: f64| {
        let model = ObserverModel::new(threshold, 0.0, 0).map_err(|e| e.to_string())?;
        run_observer(&model, Interleave::Alternate).map_err(|e| e.to_string())
    };
    let base = run(0.23)?;
    let mut worst: f64 = 0.0;
    let mut worst_at = 0.0;
    let mut reversal_counts_ok = base.reversal_count() == 12;
    for k in 5..=95 {
        let threshold = k as f64 / 100.0;
        let r = run(threshold)?;
        let err = (r.estimate - threshold).abs();
        if err > worst {
            worst = err;
            worst_at = threshold;
        }
        reversal_counts_ok &= r.reversal_count() == 12;
    }
    let base_err = (base.estimate - 0.23).abs();
    check(
        base_err <= bound && worst <= bound && reversal_counts_ok,
        format!(
            "threshold 0.23 -> {:.4} ({} reversals); sweep 0.05..0.95 max error {worst:.4} at {worst_at} \
             (bound {bound}); every run 12 reversals: {reversal_counts_ok}",
            base.estimate,
            base.reversal_count()
        ),
    )
}

fn c8_fits() -> Outcome {
    let xs: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let (la, lb) = (93.4, 4.2);
    let (ea, eb, ec) = (-6.0, 3.5, 80.0);
    let linear: Vec<(f64, f64)> = xs.iter().map(|&x| (x, la * x + lb)).collect();
    let expo: Vec<(f64, f64)> = xs.iter().map(|&x| (x, ec * (ea * x).exp() + eb)).collect();
    let l = fit_linear(&linear).map_err(|e| e.to_string())?;
    let e = fit_exponential(&expo).map_err(|e| e.to_string())?;
    let c = e.c.ok_or("exponential fit has no scale")?;
    let errs = [
        (l.a - la).abs(),
        (l.b - lb).abs(),
        (e.a - ea).abs(),
        (e.b - eb).abs(),
        (c - ec).abs(),
    ];
    let param_err = errs.iter().cloned().fold(0.0, f64::max);
    let r2_gap = (1.0 - l.r_squared).abs().max((1.0 - e.r_squared).abs());
    check(
        param_err <= 1e-6 && r2_gap <= 1e-12,
        format!(
            "linear a = {}, b = {}; exponential a = {}, b = {}, c = {c}; \
             max parameter error {param_err:.2e} (tol 1e-6), max |1 - R^2| {r2_gap:.1e}",
            l.a, l.b, e.a, e.b
        ),
    )
}

fn c9_performance() -> Outcome {
    let geometry = default_array();
    let spec = preset("S-Mix2").unwrap().with_duration(10.0);
    let frames = render_stimulus(&spec, Vec3::new(0.0, 0.2, 0.0), 1000.0).map_err(|e| e.to_string())?;
    let opts = SynthesisOptions::default();
    let exec = Execution::default();
    let start = Instant::now();
    let mut produced = 0;
    let mut checksum = 0.0;
    // One second per batch keeps memory flat, as a streaming loop would.
    for chunk in frames.chunks(1000) {
        let drives = stream_drive_with(&geometry, chunk, &opts, exec).map_err(|e| e.to_string())?;
        produced += drives.len();
        checksum += drives.iter().map(|d| d.phases[0]).sum::<f64>();
    }
    let elapsed = start.elapsed();
    let ok = produced == 10_000 && elapsed < Duration::from_secs(10) && checksum.is_finite();
    check(
        ok,
        format!(
            "{produced} frames x {} transducers x 5 foci in {:.2} s (budget 10 s, {:?} execution, {:.0} frames/s)",
            geometry.len(),
            elapsed.as_secs_f64(),
            exec,
            produced as f64 / elapsed.as_secs_f64()
        ),
    )
}

fn c10_round_trip() -> Outcome {
    let geometry = default_array();
    let spec = preset("S-Mix2").unwrap();
    let frames = render_stimulus(&spec, Vec3::new(0.0, 0.2, 0.0), 1000.0).map_err(|e| e.to_string())?;
    let drives = stream_drive_with(&geometry, &frames, &SynthesisOptions::default(), Execution::default())
        .map_err(|e| e.to_string())?;
    let log = DriveLog {
        transducer_count: geometry.len() as u32,
        frame_dt: 1e-3,
        frames: drives,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.udf"), dir.path().join("b.udf"));
    udf::write(&log, &a).map_err(|e| e.to_string())?;
    let back = udf::read(&a).map_err(|e| e.to_string())?;
    udf::write(&back, &b).map_err(|e| e.to_string())?;
    let (x, y) = (
        std::fs::read(&a).map_err(|e| e.to_string())?,
        std::fs::read(&b).map_err(|e| e.to_string())?,
    );
    check(
        x == y && back.frames.len() == 1000,
        format!("{} frames, {} bytes, second write identical: {}", back.frames.len(), x.len(), x == y),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("preset fidelity", c1_presets),
        ("envelope spectrum", c2_spectrum),
        ("trajectory geometry", c3_trajectory),
        ("focusing", c4_focusing),
        ("radiation force", c5_force),
        ("stroke session", c6_session),
        ("staircase", c7_staircase),
        ("fit recovery", c8_fits),
        ("performance", c9_performance),
        ("UDF1 round trip", c10_round_trip),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {name} [{secs:.2} s]: {detail}", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
