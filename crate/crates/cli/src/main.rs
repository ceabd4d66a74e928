mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Thin-plate-spline text shapes: fit, evaluate, supervise and visualize.
///
/// Every flag can also be set through an environment variable named
/// `TPSGEOM_<FLAG>`; a flag on the command line wins.
#[derive(Debug, Parser)]
#[command(name = "tpstext", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every annotation and write one parameter file per instance.
    Fit(FitArgs),
    /// Score fitted shapes against their annotations (IoU and TIoU).
    Eval(EvalArgs),
    /// Write border masks and Gaussian text-centre maps as PGM images.
    Masks(MasksArgs),
    /// Apply left-edge perspective rotations to an annotation file.
    Augment(AugmentArgs),
    /// Turn a TPS parameter file into a rectification sampling grid.
    Rectify(RectifyArgs),
    /// Render annotations and fitted shapes as SVG.
    Viz(VizArgs),
    /// Run the finite-difference check of the loss gradients.
    Losscheck(LosscheckArgs),
    /// Write a synthetic sine-bent corpus as generic JSON.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, env = "TPSGEOM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    #[arg(long, env = "TPSGEOM_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Cells along the longer side of the scoring raster.
    #[arg(long, env = "TPSGEOM_RESOLUTION", default_value_t = 512)]
    pub resolution: usize,
    /// Output directory (or file, for single-output commands).
    #[arg(long, env = "TPSGEOM_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepKind {
    Tps,
    Bezier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Edge,
    Cross,
    Center,
}

impl From<DistributionArg> for tpstext::Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Edge => tpstext::Distribution::Edge,
            DistributionArg::Cross => tpstext::Distribution::Cross,
            DistributionArg::Center => tpstext::Distribution::Center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Ctw1500,
}

#[derive(Debug, Args, Clone)]
pub struct Input {
    /// Annotation file.
    #[arg(long, env = "TPSGEOM_ANNOTATIONS")]
    pub annotations: PathBuf,
    /// Annotation layout.
    #[arg(long, env = "TPSGEOM_FORMAT", value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Args, Clone)]
pub struct RepArgs {
    /// Shape representation.
    #[arg(long, env = "TPSGEOM_REP", value_enum, default_value = "tps")]
    pub rep: RepKind,
    /// Fiducial layout for TPS.
    #[arg(
        long,
        env = "TPSGEOM_DISTRIBUTION",
        value_enum,
        default_value = "cross"
    )]
    pub distribution: DistributionArg,
    /// Number of fiducial points.
    #[arg(long, env = "TPSGEOM_K", default_value_t = 8)]
    pub k: usize,
    /// Correspondences sampled along each long side.
    #[arg(long, env = "TPSGEOM_PER_SIDE", default_value_t = 32)]
    pub per_side: usize,
    /// Ridge weight on the local TPS weights.
    #[arg(long, env = "TPSGEOM_REGULARIZATION", default_value_t = 1e-8)]
    pub regularization: f64,
    /// Bezier degree per side.
    #[arg(long, env = "TPSGEOM_DEGREE", default_value_t = 3)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub rep: RepArgs,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: Input,
    /// Directory of `{id}.params.json` files from `fit`; fits inline when absent.
    #[arg(long, env = "TPSGEOM_PRED")]
    pub pred: Option<PathBuf>,
    /// Score the annotations against themselves.
    #[arg(long, conflicts_with = "pred")]
    pub self_check: bool,
    #[command(flatten)]
    pub rep: RepArgs,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[command(flatten)]
    pub input: Input,
    /// Border distance threshold as a fraction of text height.
    #[arg(long, env = "TPSGEOM_TB", default_value_t = 0.6)]
    pub tb: f64,
    /// Border relaxation threshold.
    #[arg(long, env = "TPSGEOM_TR", default_value_t = 0.8)]
    pub tr: f64,
    /// Raster cells per annotation pixel.
    #[arg(long, env = "TPSGEOM_SCALE", default_value_t = 1.0)]
    pub scale: f64,
    /// Gaussian spread on the unit rectangle, across and along the text.
    #[arg(long, env = "TPSGEOM_SIGMA", default_value_t = 0.25)]
    pub sigma: f64,
    #[command(flatten)]
    pub rep: RepArgs,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub input: Input,
    /// Rotation angles in degrees.
    #[arg(
        long,
        env = "TPSGEOM_ANGLES",
        value_delimiter = ',',
        default_value = "0,45,70"
    )]
    pub angles: Vec<f64>,
    /// Image width; defaults to the annotations' extent.
    #[arg(long)]
    pub width: Option<f64>,
    /// Image height; defaults to the annotations' extent.
    #[arg(long)]
    pub height: Option<f64>,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    /// A TPS `{id}.params.json` written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    /// Rows of the rectified crop.
    #[arg(long, default_value_t = 32)]
    pub rows: usize,
    /// Columns of the rectified crop.
    #[arg(long, default_value_t = 100)]
    pub cols: usize,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[command(flatten)]
    pub input: Input,
    /// Draw the fitted boundary and control points.
    #[arg(long)]
    pub fitted: bool,
    /// Draw the relaxed border mask underneath.
    #[arg(long)]
    pub mask: bool,
    #[command(flatten)]
    pub rep: RepArgs,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    /// Random configurations to check.
    #[arg(long, env = "TPSGEOM_TRIALS", default_value_t = 1000)]
    pub trials: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Multiplies every analytic gradient; a negative control for the check.
    #[arg(
        long,
        env = "TPSGEOM_CORRUPT_GRADIENT",
        default_value_t = 1.0,
        hide = true
    )]
    pub corrupt_gradient: f64,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of instances.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Sine amplitude as a fraction of text height.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Sine periods along the text.
    #[arg(long, default_value_t = 1.5)]
    pub periods: f64,
    /// Perspective angle in degrees.
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    #[command(flatten)]
    pub global: Global,
}

/// Exit statuses: success, a failed check, bad input or configuration.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // library errors already embed their source in the message
            let mut msg = String::new();
            for cause in e.chain() {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &c;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
