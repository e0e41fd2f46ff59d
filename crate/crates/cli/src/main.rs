//! Command-line entry point wiring the engine: k-fold training, checkpoint
//! evaluation, static profiling, attention-map explanations, and page-grid
//! cropping.
//!
//! Exit codes: 0 success, 2 config/usage errors, 3 data/IO errors,
//! 4 semantic mismatches (e.g. checkpoint vs dataset class counts).

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Semantic(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Semantic(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Semantic(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bornovit",
    version,
    about = "Lightweight vision-transformer engine for handwritten-character classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// K-fold training with early stopping; writes checkpoints, per-epoch
    /// metric logs, and summary.json
    Train(TrainArgs),
    /// Evaluate a checkpoint on an image-folder dataset
    Eval(EvalArgs),
    /// Static parameter/MAC/size accounting for a configuration
    Profile(ProfileArgs),
    /// Gradient-weighted attention map for one image
    Gradcam(GradcamArgs),
    /// Cut a scanned page into a fixed grid of character cells
    CropPage(CropPageArgs),
}

#[derive(clap::Args)]
struct TrainArgs {
    /// JSON run configuration (all fields optional)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root: one subdirectory per class (overrides config)
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory for checkpoints, metric logs, and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides config)
    #[arg(long)]
    seed: Option<u64>,
    /// Start from a pretrained checkpoint, re-initializing the head if the
    /// class count differs (transfer learning)
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
    /// Train fold rotations in parallel
    #[arg(long)]
    parallel_folds: bool,
    /// Stratify folds by class
    #[arg(long)]
    stratified: bool,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    /// Directory for report.json and confusion.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
}

#[derive(clap::Args)]
struct ProfileArgs {
    /// JSON run configuration; defaults describe the published architecture
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the class count (head row scales with it)
    #[arg(long)]
    num_classes: Option<usize>,
    /// Emit the machine-readable report instead of tables
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct GradcamArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// Directory for heatmap.png and overlay.png
    #[arg(long)]
    out: PathBuf,
    /// Class to explain (default: the predicted class)
    #[arg(long)]
    class: Option<usize>,
}

#[derive(clap::Args)]
struct CropPageArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    rows: usize,
    #[arg(long, default_value_t = 6)]
    cols: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Profile(args) => commands::profile(args),
        Command::Gradcam(args) => commands::gradcam(args),
        Command::CropPage(args) => commands::crop_page(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
