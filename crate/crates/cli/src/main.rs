//! `samseg`: preprocessing, training, inference and evaluation from the
//! command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "samseg",
    version,
    about = "Segmentation with object-consistency and boundary losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a mask archive into object (SGO) and boundary (SGB) maps.
    Preprocess(PreprocessArgs),
    /// Write a seeded synthetic dataset with mask archives.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Sliding-window prediction for one image.
    Predict(PredictArgs),
    /// Score predicted label maps against ground truth.
    Evaluate(EvaluateArgs),
    /// Evaluate the loss terms on one prediction.
    Losses(LossesArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Mask archive (JSON).
    #[arg(long)]
    pub masks: PathBuf,
    /// Masks smaller than this are dropped (S).
    #[arg(long, default_value_t = 50)]
    pub min_pixels: usize,
    /// At most this many objects are kept (K).
    #[arg(long, default_value_t = 50)]
    pub max_objects: usize,
    #[arg(long)]
    pub out_sgo: PathBuf,
    #[arg(long)]
    pub out_sgb: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives image/, label/, sgo/, sgb/, masks/ and run.cfg.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 6)]
    pub shapes: usize,
    #[arg(long, default_value_t = 0.45)]
    pub noise: f64,
    /// Probability of splitting or merging each mask.
    #[arg(long, default_value_t = 0.0)]
    pub corruption: f64,
    #[arg(long, default_value_t = 50)]
    pub min_pixels: usize,
    #[arg(long, default_value_t = 50)]
    pub max_objects: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory with image/, label/, sgo/ and sgb/.
    #[arg(long)]
    pub data: PathBuf,
    /// Model checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss trace to write.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// RGB image (PPM).
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub window: usize,
    #[arg(long, default_value_t = 32)]
    pub stride: usize,
    #[arg(long)]
    pub out_prob: Option<PathBuf>,
    #[arg(long)]
    pub out_label: Option<PathBuf>,
    /// Arg-max labels rendered with the fixed palette (PPM).
    #[arg(long)]
    pub out_color: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted label maps (PGM), matched to ground truth by file name.
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    /// Comma-separated classes averaged into mF1 and mIoU.
    #[arg(long, default_value = "0,1,2,3,4")]
    pub include: String,
    #[arg(long)]
    pub ignore_label: Option<u16>,
    /// Run configuration echoed into the report.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// Probabilities (PGRD).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub sgo: PathBuf,
    #[arg(long)]
    pub sgb: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_o: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_b: f64,
    #[arg(long, default_value_t = 3)]
    pub theta0: usize,
    #[arg(long, default_value_t = 5)]
    pub theta: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub epsilon: f64,
    #[arg(long)]
    pub ignore_label: Option<u16>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// seg, obj, bdy, total or end-to-end.
    #[arg(long, default_value = "total")]
    pub loss: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Losses(a) => commands::losses(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
