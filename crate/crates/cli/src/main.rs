//! `umh`: render stimuli, synthesize drives, simulate fields and sessions, and
//! run the psychophysics harnesses.
//!
//! Exit codes: 0 success, 2 usage or schema error, 3 domain error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "umh", version, about = "Midair ultrasound tactile rendering toolkit")]
struct Cli {
    /// Output directory for written artifacts.
    #[arg(long, global = true, env = "UMH_OUT_DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the amplitude envelope and foci trajectory of a stimulus.
    Render(RenderArgs),
    /// Simulate the acoustic field of one drive frame on a plane.
    Field(FieldArgs),
    /// Run a stroke session and write its drive log.
    Session(SessionArgs),
    /// Run a psychophysics harness.
    Psycho(PsychoArgs),
    /// Check rendered envelopes against their stimulus definition.
    Verify(VerifyArgs),
    /// List the built-in stimulus presets.
    Presets,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct StimulusSource {
    /// Built-in preset name, e.g. S-Mix2.
    #[arg(long)]
    preset: Option<String>,
    /// Stimulus definition JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    source: StimulusSource,
    /// Overrides the stimulus duration.
    #[arg(long = "duration-s", visible_alias = "duration")]
    duration_s: Option<f64>,
    #[arg(long = "rate-hz", visible_alias = "rate", default_value_t = 1000.0)]
    rate_hz: f64,
    /// Stimulus centre `x,y,z` in mm.
    #[arg(long = "center-mm", value_parser = parse_vec3, default_value = "0,200,0")]
    center_mm: [f64; 3],
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Plane {
    Xz,
    Xy,
    Yz,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Superposition,
    Literal,
}

#[derive(Debug, Args)]
struct FieldArgs {
    #[command(flatten)]
    source: StimulusSource,
    /// Stimulus time of the simulated frame.
    #[arg(long = "t-s", visible_alias = "t", default_value_t = 0.0)]
    t_s: f64,
    /// Stimulus centre `x,y,z` in mm.
    #[arg(long = "center-mm", value_parser = parse_vec3, default_value = "0,200,0")]
    center_mm: [f64; 3],
    /// Plane centre `x,y,z` in mm; defaults to the stimulus centre.
    #[arg(long = "grid-center-mm", value_parser = parse_vec3)]
    grid_center_mm: Option<[f64; 3]>,
    #[arg(long, value_enum, default_value_t = Plane::Xz)]
    plane: Plane,
    /// Side length of the square plane.
    #[arg(long = "extent-mm", default_value_t = 100.0)]
    extent_mm: f64,
    /// Sample spacing on the plane.
    #[arg(long = "step-mm", default_value_t = 1.0)]
    step_mm: f64,
    #[arg(long, value_enum, default_value_t = Mode::Superposition)]
    mode: Mode,
    /// Quantize phases to 8 bits before propagation.
    #[arg(long)]
    quantize_phase: bool,
    /// Array configuration JSON; defaults to the 1992-transducer array.
    #[arg(long)]
    array: Option<PathBuf>,
    /// Report pressures in Pa using the built-in calibration.
    #[arg(long)]
    calibrated: bool,
}

#[derive(Debug, Args)]
#[group(id = "session_input", required = true, multiple = false, args = ["config", "verify"])]
struct SessionArgs {
    /// Session configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Read a drive log, rewrite it in memory and confirm the bytes match.
    #[arg(long)]
    verify: Option<PathBuf>,
    /// Array configuration JSON; defaults to the 1992-transducer array.
    #[arg(long)]
    array: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PsychoTag {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    #[value(name = "exp2-fit")]
    Exp2Fit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterleaveArg {
    Alternate,
    Random,
}

#[derive(Debug, Args)]
struct PsychoArgs {
    #[arg(value_enum)]
    tag: PsychoTag,
    /// Observer threshold on A^AM.
    #[arg(long, default_value_t = 0.23)]
    threshold: f64,
    /// Probability that the observer's response is flipped.
    #[arg(long, default_value_t = 0.0)]
    lapse: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InterleaveArg::Alternate)]
    interleave: InterleaveArg,
    /// Observer JSON (`threshold`, `lapse_rate`, `seed`); overrides the flags.
    #[arg(long)]
    observer: Option<PathBuf>,
    /// Points CSV with `a_am,intensity` columns, for exp2-fit.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, conflicts_with_all = ["spec", "all"])]
    preset: Option<String>,
    #[arg(long, conflicts_with = "all")]
    spec: Option<PathBuf>,
    /// Verify every preset.
    #[arg(long)]
    all: bool,
    /// Envelope CSV to check instead of rendering one.
    #[arg(long, conflicts_with = "all")]
    input: Option<PathBuf>,
    #[arg(long = "rate-hz", default_value_t = 1000.0)]
    rate_hz: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write the spectrum of each checked series as CSV into the output directory.
    #[arg(long)]
    write_spectrum: bool,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        let x: f64 = p.parse().map_err(|_| format!("bad number `{p}`"))?;
        if !x.is_finite() {
            return Err(format!("non-finite coordinate `{p}`"));
        }
        *slot = x;
    }
    Ok(v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
