use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use umh_core::analysis::verify_envelope;
use umh_core::field::{field_map_with, focal_metrics, FocalReport, GridSpec, PropagationModel};
use umh_core::geometry::{build_array, default_array, ArrayConfig, ArrayGeometry, Vec3};
use umh_core::par::Execution;
use umh_core::psychophys::fit::{read_points_csv, write_fits_csv};
use umh_core::psychophys::{
    fit_exponential, fit_linear, run_observer, schedule, Experiment, Interleave, ObserverModel,
};
use umh_core::session::{run_stroke_session, udf, write_tracking_csv, SessionConfigDoc};
use umh_core::stimulus::{
    envelope_at, preset, render_stimulus, trajectory_at, write_foci_csv, EnvelopeSeries, FociFrame,
    Preset, StimulusSpec,
};
use umh_core::synthesis::{drive_for_frame_with, SynthesisMode, SynthesisOptions};

use crate::{
    Cli, Command, FieldArgs, InterleaveArg, Mode, Plane, PsychoArgs, PsychoTag, RenderArgs,
    SessionArgs, StimulusSource, VerifyArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Malformed arguments or input documents.
    Usage(String),
    /// The computation itself failed.
    Domain(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<umh_core::Error> for CliError {
    fn from(e: umh_core::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Any failure while reading user input is a usage error.
fn usage<E: fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", context.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Render(a) => render(a, &out),
        Command::Field(a) => field(a, &out),
        Command::Session(a) => session(a, &out),
        Command::Psycho(a) => psycho(a, &out),
        Command::Verify(a) => verify(a, &out),
        Command::Presets => {
            print!("{}", presets_table());
            Ok(())
        }
    }
}

fn mm(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2]) * 1e-3
}

fn load_stimulus(src: &StimulusSource) -> Result<StimulusSpec> {
    let spec = match (&src.preset, &src.spec) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(usage(path))?;
            StimulusSpec::from_json_str(&text).map_err(usage(path))?
        }
        (None, None) => return Err(CliError::Usage("one of --preset or --spec is required".into())),
    };
    Ok(spec)
}

fn load_geometry(path: Option<&PathBuf>) -> Result<ArrayGeometry> {
    match path {
        None => Ok(default_array()),
        Some(p) => {
            let config = ArrayConfig::load(p).map_err(usage(p))?;
            build_array(config).map_err(usage(p))
        }
    }
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Domain(format!("cannot create {}: {e}", out.display())))
}

fn writer(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))
}

fn render(a: RenderArgs, out: &Path) -> Result<()> {
    let mut spec = load_stimulus(&a.source)?;
    if let Some(d) = a.duration_s {
        spec = spec.with_duration(d);
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(a.rate_hz.is_finite() && a.rate_hz > 0.0) {
        return Err(CliError::Usage(format!("--rate-hz must be > 0, got {}", a.rate_hz)));
    }
    let frames = render_stimulus(&spec, mm(a.center_mm), a.rate_hz)?;
    let envelope = EnvelopeSeries::render(&spec, a.rate_hz)?;

    create_out(out)?;
    let mut w = writer(out, "envelope.csv")?;
    envelope.write_csv(&mut w)?;
    w.flush()?;
    let mut w = writer(out, "foci.csv")?;
    write_foci_csv(&frames, &mut w)?;
    w.flush()?;
    println!(
        "envelope.csv: {} samples; foci.csv: {} frames x {} foci",
        envelope.len(),
        frames.len(),
        spec.foci_count
    );
    Ok(())
}

fn plane_axes(p: Plane) -> (Vec3, Vec3) {
    match p {
        Plane::Xz => (Vec3::x(), Vec3::z()),
        Plane::Xy => (Vec3::x(), Vec3::y()),
        Plane::Yz => (Vec3::y(), Vec3::z()),
    }
}

fn field(a: FieldArgs, out: &Path) -> Result<()> {
    let spec = load_stimulus(&a.source)?;
    let geometry = load_geometry(a.array.as_ref())?;
    if !(a.t_s.is_finite() && a.t_s >= 0.0) {
        return Err(CliError::Usage(format!("--t-s must be >= 0, got {}", a.t_s)));
    }
    if !(a.extent_mm > 0.0 && a.step_mm > 0.0 && a.step_mm <= a.extent_mm) {
        return Err(CliError::Usage(format!(
            "need 0 < --step-mm <= --extent-mm, got step {} and extent {}",
            a.step_mm, a.extent_mm
        )));
    }
    let center = mm(a.center_mm);
    let frame = FociFrame {
        time: a.t_s,
        foci: trajectory_at(&spec, center, a.t_s)?,
        amplitude: envelope_at(&spec, a.t_s),
    };
    let opts = SynthesisOptions {
        mode: match a.mode {
            Mode::Superposition => SynthesisMode::Superposition,
            Mode::Literal => SynthesisMode::LiteralPhaseSum,
        },
        quantize_phase: a.quantize_phase,
    };
    let drive = drive_for_frame_with(&geometry, &frame, &opts)?;

    let n = (a.extent_mm / a.step_mm).round() as usize + 1;
    let extent = (n - 1) as f64 * a.step_mm * 1e-3;
    let (u, v) = plane_axes(a.plane);
    let grid_center = a.grid_center_mm.map_or(center, mm);
    let grid = GridSpec::centered(grid_center, u, v, (extent, extent), (n, n))?;
    let model = if a.calibrated {
        PropagationModel::calibrated()
    } else {
        PropagationModel::default()
    };
    let map = field_map_with(&geometry, &model, &drive, &grid, Execution::default())?;

    create_out(out)?;
    let mut w = writer(out, "field.csv")?;
    map.write_csv(&mut w)?;
    w.flush()?;
    let mut w = writer(out, "field.pgm")?;
    map.write_pgm(&mut w)?;
    w.flush()?;

    let (i, j, peak) = map.global_max();
    let p = grid.point(i, j) * 1e3;
    println!("grid {n}x{n}, step {} mm, frame amplitude {}", a.step_mm, frame.amplitude);
    println!(
        "peak |p| = {peak:.6e} at pixel ({i}, {j}) = ({:.3}, {:.3}, {:.3}) mm",
        p.x, p.y, p.z
    );
    println!("local maxima: {}", map.local_maxima().len());
    // Only foci lying on the sampled plane can be matched against its maxima.
    let normal = u.cross(&v);
    let slack = 0.5 * a.step_mm * 1e-3;
    let inside: Vec<Vec3> = frame
        .foci
        .iter()
        .copied()
        .filter(|f| {
            let (fu, fv) = grid.project(f);
            let off_plane = (f - grid_center).dot(&normal).abs();
            (0.0..=extent).contains(&fu) && (0.0..=extent).contains(&fv) && off_plane <= slack
        })
        .collect();
    for (k, r) in focal_metrics(&map, &inside)?.iter().enumerate() {
        match r {
            FocalReport::Focused { offset, peak_magnitude, .. } => println!(
                "focus {k}: nearest maximum {:.3} mm away, |p| = {peak_magnitude:.6e}",
                offset * 1e3
            ),
            FocalReport::NotFocused => println!("focus {k}: not focused"),
        }
    }
    Ok(())
}

fn session(a: SessionArgs, out: &Path) -> Result<()> {
    if let Some(path) = &a.verify {
        let bytes = fs::read(path).map_err(usage(path))?;
        let log = udf::decode(&bytes)?;
        let again = udf::encode(&log)?;
        if again != bytes {
            return Err(CliError::Domain(format!(
                "{}: rewritten log differs from the original",
                path.display()
            )));
        }
        println!(
            "round-trip OK: {} frames, {} transducers, {} bytes",
            log.frames.len(),
            log.transducer_count,
            bytes.len()
        );
        return Ok(());
    }
    let path = a.config.as_ref().expect("clap enforces one input");
    let text = fs::read_to_string(path).map_err(usage(path))?;
    let doc = SessionConfigDoc::from_json_str(&text).map_err(usage(path))?;
    let (config, spec) = doc.resolve().map_err(usage(path))?;
    let geometry = load_geometry(a.array.as_ref())?;
    let log = run_stroke_session(&geometry, &config, &spec)?;

    create_out(out)?;
    udf::write(&log.drive, out.join("drive.udf"))?;
    let mut w = writer(out, "tracking.csv")?;
    write_tracking_csv(&log.tracking_events, &mut w)?;
    w.flush()?;
    let summary = log.summary();
    let mut w = writer(out, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| CliError::Domain(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;

    for warning in &log.warnings {
        eprintln!("warning: {warning}");
    }
    println!("duration_s: {}", summary.duration_s);
    println!("frames: {}", summary.frame_count);
    println!("tracking events: {}", summary.tracking_events);
    println!("contact events: {}", summary.contact_events);
    Ok(())
}

fn psycho(a: PsychoArgs, out: &Path) -> Result<()> {
    match a.tag {
        PsychoTag::Exp1 => {
            let model = match &a.observer {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(usage(p))?;
                    ObserverModel::from_json_str(&text).map_err(usage(p))?
                }
                None => ObserverModel::new(a.threshold, a.lapse, a.seed)?,
            };
            let interleave = match a.interleave {
                InterleaveArg::Alternate => Interleave::Alternate,
                InterleaveArg::Random => Interleave::Random,
            };
            let run = run_observer(&model, interleave)?;
            create_out(out)?;
            let mut w = writer(out, "exp1_trials.csv")?;
            run.write_trials_csv(&mut w)?;
            w.flush()?;
            let result = serde_json::json!({
                "observer": model,
                "interleave": interleave,
                "estimate": run.estimate,
                "trials": run.trials.len(),
                "ascending_reversals": run.ascending.reversals,
                "descending_reversals": run.descending.reversals,
            });
            let mut w = writer(out, "exp1_result.json")?;
            serde_json::to_writer_pretty(&mut w, &result).map_err(|e| CliError::Domain(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
            println!("trials: {}", run.trials.len());
            println!("reversals: {}", run.reversal_count());
            println!("estimate: {}", run.estimate);
        }
        PsychoTag::Exp2 | PsychoTag::Exp3 | PsychoTag::Exp4 => {
            let experiment = match a.tag {
                PsychoTag::Exp2 => Experiment::Exp2,
                PsychoTag::Exp3 => Experiment::Exp3,
                _ => Experiment::Exp4,
            };
            let s = schedule(experiment, a.seed);
            create_out(out)?;
            let name = format!("{experiment}_schedule.csv");
            let mut w = writer(out, &name)?;
            s.write_csv(&mut w)?;
            w.flush()?;
            println!("{experiment}: {} trials, seed {} -> {name}", s.trials.len(), a.seed);
        }
        PsychoTag::Exp2Fit => {
            let path = a
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("exp2-fit requires --input <points.csv>".into()))?;
            let file = File::open(path).map_err(usage(path))?;
            let points = read_points_csv(BufReader::new(file)).map_err(usage(path))?;
            let fits = [fit_linear(&points)?, fit_exponential(&points)?];
            create_out(out)?;
            let mut w = writer(out, "exp2_fit.csv")?;
            write_fits_csv(&fits, &mut w)?;
            w.flush()?;
            for f in &fits {
                match f.c {
                    None => println!(
                        "{}: I = a*x + b, a = {}, b = {}, R^2 = {}",
                        f.model.as_str(),
                        f.a,
                        f.b,
                        f.r_squared
                    ),
                    Some(c) => println!(
                        "{}: I = c*exp(a*x) + b, a = {}, b = {}, c = {c}, R^2 = {}",
                        f.model.as_str(),
                        f.a,
                        f.b,
                        f.r_squared
                    ),
                }
            }
        }
    }
    Ok(())
}

fn verify(a: VerifyArgs, out: &Path) -> Result<()> {
    let targets: Vec<(String, StimulusSpec)> = if a.all {
        Preset::ALL.iter().map(|p| (p.name().to_string(), p.spec())).collect()
    } else {
        let source = StimulusSource {
            preset: a.preset.clone(),
            spec: a.spec.clone(),
        };
        let name = a
            .preset
            .clone()
            .or_else(|| a.spec.as_ref().map(|p| p.display().to_string()))
            .ok_or_else(|| CliError::Usage("one of --preset, --spec or --all is required".into()))?;
        vec![(name, load_stimulus(&source)?)]
    };
    if !(a.rate_hz.is_finite() && a.rate_hz > 0.0) {
        return Err(CliError::Usage(format!("--rate-hz must be > 0, got {}", a.rate_hz)));
    }
    let mut failed = 0;
    for (name, spec) in &targets {
        let series = match &a.input {
            Some(p) => {
                let file = File::open(p).map_err(usage(p))?;
                EnvelopeSeries::read_csv(BufReader::new(file)).map_err(usage(p))?
            }
            None => EnvelopeSeries::render(spec, a.rate_hz)?,
        };
        let report = verify_envelope(spec, &series, a.tol);
        println!("{name}");
        for line in report.to_string().lines() {
            println!("  {line}");
        }
        if !report.passed() {
            failed += 1;
        }
        if let (true, Some(s)) = (a.write_spectrum, &report.spectrum) {
            create_out(out)?;
            let file = format!("{}_spectrum.csv", name.replace(['/', '\\'], "_"));
            let mut w = writer(out, &file)?;
            s.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    if failed > 0 {
        return Err(CliError::Domain(format!(
            "{failed} of {} envelopes failed verification",
            targets.len()
        )));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn presets_table() -> String {
    let mut s = String::new();
    s.push_str("# allocation ratio lambda\n");
    for p in Preset::ALLOCATION_SET {
        s.push_str(&format!("{:<10} {}\n", p.name(), opt(p.lambda())));
    }
    s.push_str("\n# modulation amplitude A^AM\n");
    for p in Preset::TEXTURE_SET {
        s.push_str(&format!("{:<10} {}\n", p.name(), p.a_am()));
    }
    s.push_str("\n# all parameters\n");
    s.push_str(
        "name       f_lm_hz radius_mm spacing_mm foci f_am1_hz f_am2_hz lambda a_am a_max duration_s\n",
    );
    for p in Preset::ALL {
        let spec = p.spec();
        s.push_str(&format!(
            "{:<10} {:<7} {:<9} {:<10} {:<4} {:<8} {:<8} {:<6} {:<4} {:<5} {}\n",
            p.name(),
            spec.f_lm,
            spec.radius_mm,
            spec.spacing_mm,
            spec.foci_count,
            spec.f_am1,
            spec.f_am2,
            opt(p.lambda()),
            spec.a_am,
            spec.a_max,
            spec.duration
        ));
    }
    s
}
