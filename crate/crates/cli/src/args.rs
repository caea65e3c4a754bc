use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Fall-detection workbench for a standing planar four-link robot.
#[derive(Debug, Parser)]
#[command(name = "falltime", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every command. A config file given with `--config`
/// overrides these flags.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to FALLTIME_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Robot parameter file (TOML with schema_version).
    #[arg(long, global = true)]
    pub robot_params: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub report_dir: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,

    /// Trajectories per fault kind.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub abrupt_count: Option<usize>,
    #[arg(long, global = true)]
    pub incipient_count: Option<usize>,

    #[arg(long, global = true)]
    pub feature_set: Option<String>,
    #[arg(long, global = true)]
    pub incipient_features: Option<String>,
    #[arg(long, global = true)]
    pub abrupt_features: Option<String>,
    /// Detector kinds (nn, svm); repeatable.
    #[arg(long = "detector", global = true)]
    pub detectors: Vec<String>,
    /// Test folds, 1-based; repeatable.
    #[arg(long = "fold", global = true)]
    pub folds: Vec<usize>,
    /// holdout or k-fold.
    #[arg(long, global = true)]
    pub split: Option<String>,
    #[arg(long, global = true)]
    pub split_seed: Option<u64>,
    #[arg(long, global = true)]
    pub n_window: Option<usize>,
    #[arg(long, global = true)]
    pub n_monitor: Option<usize>,
    #[arg(long, global = true)]
    pub fire_threshold: Option<usize>,
    #[arg(long, global = true)]
    pub svm_c: Option<f64>,
    #[arg(long, global = true)]
    pub svm_gamma: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub fpr_max: Option<f64>,
    #[arg(long, global = true)]
    pub fnr_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the trajectory dataset.
    Generate(GenerateArgs),
    /// Feature/lead-time distance-correlation report and window export.
    Features(FeaturesArgs),
    /// Train one binary detector for a fold and regime.
    Train(TrainArgs),
    /// Evaluate saved models on their test folds.
    Eval(EvalArgs),
    /// Run the binary fold × regime × detector experiment.
    GridSearch(GridSearchArgs),
    /// Run the multiclass experiment.
    Multiclass,
    /// Write the result tables and summary from saved experiment results.
    Report(ReportArgs),
    /// Export decision-value series for plotting.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Calibrate both force ranges to a fall fraction of one half first.
    #[arg(long)]
    pub calibrate: bool,
    #[arg(long, default_value_t = 0.05)]
    pub calibration_tolerance: f64,
    #[arg(long, default_value_t = 100)]
    pub pilot_size: usize,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Also write labeled windows of every trajectory to this CSV.
    #[arg(long)]
    pub export_windows: Option<PathBuf>,
    /// Training lead time for the exported labels.
    #[arg(long, default_value_t = 0.5)]
    pub lead_time: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// abrupt-only, incipient-only or both.
    #[arg(long, default_value = "both")]
    pub regime: String,
    /// Fixed training lead time; grid search when absent.
    #[arg(long)]
    pub lead_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model files; every model in the model directory when absent.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Accept models whose hashes differ from the current run.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GridSearchArgs {
    /// Binary regimes to run; all three when absent. Repeatable.
    #[arg(long = "regime")]
    pub regimes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Write the report even when result hashes differ from the current run.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory ids; the model's test fold when absent. Repeatable.
    #[arg(long = "trajectory")]
    pub trajectories: Vec<u64>,
    /// Output directory; `<report-dir>/plot/<model stem>` by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}
