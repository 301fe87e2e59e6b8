//! `mvpose`: batch front end for synthesis, fusion, selection, export and
//! evaluation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
//! posterior.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvpose::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "mvpose", version, about = "Multi-view 3D pose fusion and annotation harvesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic scenario: calibration, skeleton, ground truth, heatmaps, manifest.
    Synth(SynthArgs),
    /// Fuse every frame of a heatmap manifest into pose records (JSON Lines).
    Fuse(FuseArgs),
    /// Keep the most confident fraction of fused joints, per joint.
    Select(SelectArgs),
    /// Render training targets (heatmaps, masks, 3D vectors) from a selection.
    Export(ExportArgs),
    /// Compare a pose document against ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    /// Cameras on a ring around the origin, looking at it.
    #[arg(long, default_value_t = 3)]
    pub cameras: usize,
    /// Ring radius (mm).
    #[arg(long, default_value_t = 4500.0)]
    pub radius: f64,
    /// Camera height above the ground plane (mm).
    #[arg(long, default_value_t = 1000.0)]
    pub height: f64,
    /// Focal length (pixels).
    #[arg(long, default_value_t = 300.0)]
    pub focal: f64,
    /// Square image side (pixels).
    #[arg(long, default_value_t = 256)]
    pub image_size: u32,
    /// Built-in model (`body14`, `body15`) or a skeleton document.
    #[arg(long, default_value = "body14")]
    pub skeleton: String,
    /// Heatmap Gaussian standard deviation (pixels).
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Uniform noise amplitude added to every heatmap value.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Blank one heatmap, as `frame:camera:joint` (indices). Repeatable.
    #[arg(long = "occlude", value_name = "F:C:J")]
    pub occlusions: Vec<String>,
    /// Displace one heatmap peak, as `frame:camera:joint:dx:dy` (pixels). Repeatable.
    #[arg(long = "corrupt", value_name = "F:C:J:DX:DY")]
    pub corruptions: Vec<String>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Heatmap manifest; relative paths resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output pose document (JSON Lines, one record per frame).
    #[arg(long)]
    pub out: PathBuf,
    /// Voxels per axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Side of the cubic volume (mm).
    #[arg(long, default_value_t = 2000.0)]
    pub side: f64,
    /// Fixed volume center `x,y,z` (mm); by default each frame is centered on
    /// its triangulated joints.
    #[arg(long, value_name = "X,Y,Z")]
    pub center: Option<String>,
    /// Lower clamp on heatmap values before taking logs.
    #[arg(long, default_value_t = 1e-6)]
    pub floor: f64,
    /// Limb-length tolerance (mm); the skeleton's own setting by default.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Frames fused concurrently; all available cores by default.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Drop frames that fail (bad data or degenerate posterior) instead of aborting.
    #[arg(long)]
    pub skip_bad_frames: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Score {
    /// Determinant of the marginal covariance.
    CovDet,
    /// Trace of the marginal covariance.
    Trace,
    /// Highest voxel probability of the marginal.
    Peak,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Pose document written by `fuse`.
    #[arg(long)]
    pub poses: PathBuf,
    /// Fraction kept per joint, in (0, 1].
    #[arg(long, default_value_t = 0.7)]
    pub fraction: f64,
    #[arg(long, value_enum, default_value_t = Score::CovDet)]
    pub score: Score,
    /// Output selection document.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Selection document written by `select`.
    #[arg(long)]
    pub selection: PathBuf,
    /// Output directory for targets and the training manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Target Gaussian standard deviation (pixels).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Target raster size `HxW`; each camera's image size by default.
    #[arg(long, value_name = "HxW")]
    pub size: Option<String>,
    /// Root joint for relative depth; pelvis, else neck, by default.
    #[arg(long)]
    pub root: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Predicted pose document.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth pose document.
    #[arg(long)]
    pub gt: PathBuf,
    /// PCP threshold as a fraction of the true part length.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Adds 2D PCP over the views of this calibration.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Degenerate => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Fuse(a) => commands::fuse(&a),
        Command::Select(a) => commands::select(&a),
        Command::Export(a) => commands::export(&a),
        Command::Eval(a) => commands::eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
