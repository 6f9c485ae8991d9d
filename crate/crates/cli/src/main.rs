//! Command-line front end for null-space metric learning: dataset
//! generation, training, semi-supervised self-training, projection,
//! cross-view evaluation, and score fusion.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error (bad data, failed
//! training, protocol violations). Logs go to stderr; results and reports go
//! to stdout or the requested output files.

mod commands;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// A command line that parsed but asks for something contradictory or out of
/// range; reported like a parse failure (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Kernel choice for `train`: `none` selects the linear (input-space) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Linear,
    None,
}

/// Kernel choice for `semisup`, which is inherently kernelized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SemiKernelArg {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Fmat,
    Csv,
}

/// `auto` or an explicit positive real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOrReal {
    Auto,
    Explicit(f64),
}

fn parse_auto_or_real(s: &str) -> Result<AutoOrReal, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(AutoOrReal::Auto);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(AutoOrReal::Explicit)
        .ok_or_else(|| format!("expected `auto` or a positive real, got `{s}`"))
}

#[derive(Parser, Debug)]
#[command(
    name = "nfst",
    about = "Null-space metric learning for cross-view re-identification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand, Debug)]
enum Commands {
    /// Train a null-space model on a labeled feature set
    Train(TrainArgs),
    /// Evaluate a model (or a precomputed distance matrix) with CMC and mAP
    Eval(EvalArgs),
    /// Semi-supervised self-training on labeled plus unlabeled data
    Semisup(SemisupArgs),
    /// Generate synthetic multi-view identity data
    Synth(SynthArgs),
    /// Fuse two distance matrices by per-probe z-scoring
    Fuse(FuseArgs),
    /// Project a feature matrix through a trained model
    Project(ProjectArgs),
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// Feature matrix (FMAT or CSV), one column per sample
    #[arg(long)]
    pub features: PathBuf,
    /// Labels CSV: sample_id,person_id,camera_id
    #[arg(long)]
    pub labels: PathBuf,
    /// Output model directory
    #[arg(long)]
    pub model: PathBuf,
    /// Kernel: rbf, linear, or none (input-space linear model)
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    pub kernel: KernelArg,
    /// RBF width: auto (mean pairwise distance) or a positive real
    #[arg(long, default_value = "auto", value_parser = parse_auto_or_real)]
    pub sigma: AutoOrReal,
    /// Numerical rank tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Relative tolerance for the projected within-class collapse check
    #[arg(long, default_value_t = 1e-6)]
    pub collapse_tol: f64,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    /// Model directory (projection mode)
    #[arg(long, required_unless_present = "dist", conflicts_with = "dist")]
    pub model: Option<PathBuf>,
    /// Precomputed probe x gallery distance matrix (skips projection)
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Probe feature matrix
    #[arg(long, required_unless_present = "dist", conflicts_with = "dist")]
    pub probe_features: Option<PathBuf>,
    /// Probe labels CSV
    #[arg(long)]
    pub probe_labels: PathBuf,
    /// Gallery feature matrix
    #[arg(long, required_unless_present = "dist", conflicts_with = "dist")]
    pub gallery_features: Option<PathBuf>,
    /// Gallery labels CSV
    #[arg(long)]
    pub gallery_labels: PathBuf,
    /// Pool probe features per person (in feature space, before projection)
    #[arg(long, conflicts_with = "dist")]
    pub multi_query: bool,
    /// Write the full CMC curve plus mAP as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the probe x gallery distance matrix as FMAT (fusion input)
    #[arg(long, conflicts_with = "dist")]
    pub dist_out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct SemisupArgs {
    #[arg(long)]
    pub labeled_features: PathBuf,
    #[arg(long)]
    pub labeled_labels: PathBuf,
    #[arg(long)]
    pub unlabeled_features: PathBuf,
    #[arg(long)]
    pub unlabeled_labels: PathBuf,
    /// Output model directory
    #[arg(long)]
    pub model: PathBuf,
    /// Cross-view neighbors per vertex
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Fraction of neighborhoods kept as pseudo-classes, in (0, 1]
    #[arg(long, default_value_t = 0.40)]
    pub f: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = SemiKernelArg::Rbf)]
    pub kernel: SemiKernelArg,
    /// RBF width: auto or a positive real
    #[arg(long, default_value = "auto", value_parser = parse_auto_or_real)]
    pub sigma: AutoOrReal,
    /// Heat-kernel bandwidth for graph weights: auto or a positive real
    #[arg(long, default_value = "auto", value_parser = parse_auto_or_real)]
    pub heat_width: AutoOrReal,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub collapse_tol: f64,
    /// Write per-iteration diagnostics CSV (iter,mean_knn_dist,num_pseudo_classes)
    #[arg(long)]
    pub diag: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Number of identities
    #[arg(long)]
    pub ids: usize,
    /// Number of camera views
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    /// Feature dimension
    #[arg(long)]
    pub dim: usize,
    /// Samples per identity per view
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Scale of the per-view affine shift
    #[arg(long, default_value_t = 0.5)]
    pub view_shift: f64,
    /// Per-sample Gaussian noise sigma
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Fmat)]
    pub format: FormatArg,
    /// Write the whole set: feature matrix path (requires --labels-out)
    #[arg(long)]
    pub features_out: Option<PathBuf>,
    /// Write the whole set: labels CSV path (requires --features-out)
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Instead, emit a ready benchmark (train/probe/gallery) into a directory
    #[arg(long)]
    pub bench_dir: Option<PathBuf>,
    /// Benchmark mode: fraction of identities used for training
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Benchmark mode: seed for the identity split
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(clap::Args, Debug)]
pub struct FuseArgs {
    /// First distance matrix (probe x gallery)
    #[arg(long)]
    pub dist_a: PathBuf,
    /// Second distance matrix, same shape and row order
    #[arg(long)]
    pub dist_b: PathBuf,
    /// Output FMAT path for the fused matrix
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct ProjectArgs {
    /// Model directory
    #[arg(long)]
    pub model: PathBuf,
    /// Feature matrix to project (FMAT or CSV)
    #[arg(long)]
    pub features: PathBuf,
    /// Output FMAT path for the projected matrix
    #[arg(long)]
    pub out: PathBuf,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    log::info!("config: {:?}", cli.command);

    let result = match cli.command {
        Commands::Train(args) => commands::train(&args),
        Commands::Eval(args) => commands::eval(&args),
        Commands::Semisup(args) => commands::semisup(&args),
        Commands::Synth(args) => commands::synth(&args),
        Commands::Fuse(args) => commands::fuse(&args),
        Commands::Project(args) => commands::project(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
