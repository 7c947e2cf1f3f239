//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ProjectConfig;

#[derive(Debug, Parser)]
#[command(name = "histokit", version, about = "Cluster-based tile annotation and histology-augmented survival models")]
pub struct Cli {
    /// Project configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit mini-batch k-means and write the model, assignments and annotation tree.
    Cluster(ClusterArgs),
    /// Per-cluster label purity and coverage against ground-truth tile labels.
    Purity(PurityArgs),
    /// Export tile labels from an annotation tree.
    AnnotateExport(AnnotateExportArgs),
    /// Per-patient cluster fractions.
    Fractions(FractionsArgs),
    /// Repeated KNN evaluation of embeddings against binary labels.
    KnnEval(KnnEvalArgs),
    /// Baseline versus cluster-augmented Cox models over stratified splits.
    Survival(SurvivalArgs),
    /// Serve the review API and UI for an annotation tree.
    Serve(ServeArgs),
    /// Generate a synthetic cohort for trying the pipeline.
    Synth(SynthArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("{v} is not in (0, 1)")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub batch_size: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// L2-normalize rows before clustering.
    #[arg(long)]
    pub normalize: bool,
    /// Output directory for model.json, assignments.csv and tree.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tree location (default: <out>/tree.json).
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PurityArgs {
    /// Manifest carrying ground-truth labels.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Existing `tile_id,cluster` assignments.
    #[arg(long, conflicts_with = "k")]
    pub assignments: Option<PathBuf>,
    /// Cluster the embeddings at each of these k (comma separated) instead.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// L2-normalize rows before clustering.
    #[arg(long)]
    pub normalize: bool,
    /// Purity threshold.
    #[arg(long, default_value_t = crate::clusterer::DEFAULT_PURITY_THRESHOLD)]
    pub tau: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateExportArgs {
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output CSV (default: <output_dir>/annotations.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FractionsArgs {
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    /// Output CSV (default: <output_dir>/fractions.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KnnEvalArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Manifest aligned with the reference embeddings.
    #[arg(long)]
    pub reference_manifest: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub query_manifest: PathBuf,
    /// Label counted as positive; every other label is negative.
    #[arg(long)]
    pub positive: String,
    #[arg(long, default_value_t = crate::knn::DEFAULT_K, value_parser = positive)]
    pub k: usize,
    #[arg(long, default_value_t = crate::knn::DEFAULT_RUNS, value_parser = positive)]
    pub runs: usize,
    /// Share of reference rows kept in each run.
    #[arg(long, default_value_t = 0.8)]
    pub subsample: f64,
    #[arg(long, default_value = "cosine")]
    pub metric: crate::knn::Metric,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the summary JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    #[arg(long)]
    pub clinical: Option<PathBuf>,
    #[arg(long)]
    pub fractions: Option<PathBuf>,
    /// Clinical baselines, comma separated: gleason, capra_s, mskcc_s.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<crate::cohort::CovariateSet>>,
    #[arg(long, value_parser = positive)]
    pub splits: Option<usize>,
    #[arg(long, value_parser = open_unit)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub penalizer: Option<f64>,
    #[arg(long)]
    pub l1_ratio: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Compare the baseline against itself (no cluster columns).
    #[arg(long)]
    pub no_fractions: bool,
    /// Use these clusters instead of the importance analysis.
    #[arg(long, value_delimiter = ',')]
    pub clusters: Option<Vec<usize>>,
    /// Number of clusters to select.
    #[arg(long, default_value_t = crate::cohort::DEFAULT_SELECTED)]
    pub select: usize,
    /// Resampled fits used by the importance analysis.
    #[arg(long, default_value_t = crate::cohort::DEFAULT_IMPORTANCE_FITS, value_parser = positive)]
    pub importance_fits: usize,
    /// Also write the split assignments.
    #[arg(long)]
    pub export_splits: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub tile_root: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = positive)]
    pub patients: usize,
    #[arg(long, default_value_t = 50, value_parser = positive)]
    pub tiles: usize,
    #[arg(long, default_value_t = 16, value_parser = positive)]
    pub dim: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Failure of a command.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default(),
    };
    match cli.command {
        Command::Cluster(a) => commands::cluster(&config, a),
        Command::Purity(a) => commands::purity(&config, a),
        Command::AnnotateExport(a) => commands::annotate_export(&config, a),
        Command::Fractions(a) => commands::fractions(&config, a),
        Command::KnnEval(a) => commands::knn_eval(a),
        Command::Survival(a) => commands::survival(&config, a),
        Command::Serve(a) => commands::serve(&config, a),
        Command::Synth(a) => commands::synth(a),
    }
}
