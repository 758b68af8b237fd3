//! `slscan`: file-based front-end for the structured-light pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 numerical
//! failure.

mod calibrate;
mod pipeline;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slscan::ErrorClass;

#[derive(Parser)]
#[command(
    name = "slscan",
    version,
    about = "Coded phase-shift structured-light scanning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate sinusoid and Gray-code pattern images plus a manifest.
    GenPatterns(GenPatternsArgs),
    /// Render the capture stack a camera would record of a scene.
    Simulate(SimulateArgs),
    /// Decode a capture stack into phase and correspondence maps.
    Decode(DecodeArgs),
    /// Calibrate camera, projector or the full rig from planar views.
    Calibrate(CalibrateArgs),
    /// Triangulate a correspondence map into a point cloud.
    Triangulate(TriangulateArgs),
    /// Measure plan lengths on point maps and report accuracy/precision.
    Evaluate(EvaluateArgs),
    /// Synthesize noiseless calibration views for a rig.
    SynthViews(SynthViewsArgs),
    /// Write the bundled reference calibration, scene, plan and views.
    Fixtures(FixturesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationArg {
    V,
    H,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeArg {
    Gray,
    Binary,
}

#[derive(clap::Args, Serialize)]
pub struct GenPatternsArgs {
    #[arg(long, default_value_t = 1024)]
    pub width: u32,
    #[arg(long, default_value_t = 768)]
    pub height: u32,
    /// Fringe width in projector pixels (vertical fringes).
    #[arg(long, default_value_t = 64)]
    pub fringe_width: u32,
    /// Fringe width for horizontal fringes; defaults to --fringe-width.
    #[arg(long)]
    pub fringe_width_h: Option<u32>,
    #[arg(long, value_enum, default_value_t = OrientationArg::Both)]
    pub orientation: OrientationArg,
    #[arg(long, value_enum, default_value_t = CodeArg::Gray)]
    pub code: CodeArg,
    #[arg(long, default_value_t = 127.5)]
    pub idc: f64,
    #[arg(long, default_value_t = 127.5)]
    pub imod: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Directory holding the pattern images and manifest.json.
    #[arg(long)]
    pub patterns: PathBuf,
    /// Overrides the scene's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scene's noise sigma (gray levels).
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Overrides the scene's projector gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Box-blur radius applied to patterns (projector pixels).
    #[arg(long, default_value_t = 0)]
    pub blur_radius: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write depth, true correspondence, corners and plan.
    #[arg(long)]
    pub emit_ground_truth: bool,
}

#[derive(clap::Args, Serialize)]
pub struct DecodeArgs {
    /// Directory of captures named as in the manifest.
    #[arg(long)]
    pub captures: PathBuf,
    /// Pattern manifest; defaults to <captures>/manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Minimum modulation in gray levels.
    #[arg(long, default_value_t = 10.0)]
    pub m_min: f64,
    /// Median-filter radius for fringe orders (0 = off).
    #[arg(long, default_value_t = 0)]
    pub median_filter: usize,
    /// Window radius for whole-period repair of the unwrapped phase (0 = off).
    #[arg(long, default_value_t = 2)]
    pub jump_radius: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibMode {
    Camera,
    Projector,
    Stereo,
}

#[derive(clap::Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub views: PathBuf,
    #[arg(long, value_enum, default_value_t = CalibMode::Stereo)]
    pub mode: CalibMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Camera image size, WIDTHxHEIGHT.
    #[arg(long, default_value = "1600x1200", value_parser = parse_size)]
    pub camera_size: (u32, u32),
    /// Projector image size, WIDTHxHEIGHT.
    #[arg(long, default_value = "1024x768", value_parser = parse_size)]
    pub projector_size: (u32, u32),
    /// Board extent in meters, WIDTHxHEIGHT; projected corners outside are dropped.
    #[arg(long, value_parser = parse_extent)]
    pub board_size: Option<(f64, f64)>,
    /// Known camera calibration to use instead of calibrating the camera.
    #[arg(long)]
    pub camera_calib: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
pub struct TriangulateArgs {
    /// Directory with xp.pfm and yp.pfm from `decode`.
    #[arg(long)]
    pub correspondence: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Largest accepted ray gap in meters.
    #[arg(long, default_value_t = slscan::reconstruct::DEFAULT_MAX_GAP_M)]
    pub max_gap: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_map: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    All,
}

#[derive(clap::Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(value_enum)]
    pub metric: Metric,
    #[arg(long, num_args = 1.., required = true)]
    pub point_maps: Vec<PathBuf>,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional tab-separated per-length table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Projector-column map of the first scan; enables the waviness diagnostic.
    #[arg(long)]
    pub xp: Option<PathBuf>,
    /// Fringe width used to check the waviness span.
    #[arg(long, default_value_t = 64.0)]
    pub fringe_width: f64,
}

#[derive(clap::Args, Serialize)]
pub struct SynthViewsArgs {
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the camera's lens distortion in the synthesized pixels.
    #[arg(long)]
    pub keep_distortion: bool,
}

#[derive(clap::Args, Serialize)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w: u32 = w.parse().map_err(|e| format!("width: {e}"))?;
    let h: u32 = h.parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("sizes must be positive".into());
    }
    Ok((w, h))
}

fn parse_extent(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w: f64 = w.parse().map_err(|e| format!("width: {e}"))?;
    let h: f64 = h.parse().map_err(|e| format!("height: {e}"))?;
    if !(w > 0.0 && h > 0.0) {
        return Err("extent must be positive".into());
    }
    Ok((w, h))
}

/// Flag combinations that parse but make no sense.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<slscan::Error>() {
            return match e.class() {
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenPatterns(a) => pipeline::gen_patterns(a),
        Command::Simulate(a) => pipeline::simulate(a),
        Command::Decode(a) => pipeline::decode(a),
        Command::Calibrate(a) => calibrate::calibrate(a),
        Command::Triangulate(a) => pipeline::triangulate(a),
        Command::Evaluate(a) => pipeline::evaluate(a),
        Command::SynthViews(a) => calibrate::synth_views(a),
        Command::Fixtures(a) => calibrate::fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
