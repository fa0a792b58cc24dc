use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use perceptimetric::abx::GroupBy;
use perceptimetric::stats::Level;

#[derive(Debug, Parser)]
#[command(name = "perceptimetric", version, about = "Compare speech representations with human ABX phone discrimination")]
pub struct Cli {
    /// Worker threads for parallel stages (default: one per core).
    #[arg(long, global = true, env = "PERCEPTIMETRIC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Compute MFCC features for every WAV file in a directory.
    Mfcc(MfccArgs),
    /// Evaluate the DTW Δ of every triplet against a feature archive.
    Delta(DeltaArgs),
    /// ABX accuracy (fraction of Δ > 0) per group.
    Abx(AbxArgs),
    /// Native minus non-native ABX accuracy per group.
    AbxDiff(AbxDiffArgs),
    /// Fit the probit lasso and report its log-likelihood.
    Probit(ProbitArgs),
    /// Spearman ρ between mean Δ and mean human accuracy.
    Spearman(SpearmanArgs),
    /// Correlation of model and human native-language effects.
    NativeEffect(NativeEffectArgs),
    /// Participant-bootstrap interval for a metric.
    Bootstrap(BootstrapArgs),
    /// Bootstrap the difference of a metric between two models.
    Compare(CompareArgs),
    /// Assemble metric outputs into markdown/CSV tables and optional plots.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ll,
    Spearman,
    NativeEffect,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Ll => "ll",
            MetricKind::Spearman => "spearman",
            MetricKind::NativeEffect => "native_effect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFilter {
    French,
    English,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelArg {
    Contrast,
    Stimulus,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Contrast => Level::Contrast,
            LevelArg::Stimulus => Level::Stimulus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupByArg {
    Contrast,
    Subset,
    SubsetLanguage,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> GroupBy {
        match g {
            GroupByArg::Contrast => GroupBy::Contrast,
            GroupByArg::Subset => GroupBy::Subset,
            GroupByArg::SubsetLanguage => GroupBy::SubsetLanguage,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MfccArgs {
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 25.0)]
    pub window_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    pub stride_ms: f64,
    #[arg(long, default_value_t = 13)]
    pub coeffs: usize,
    /// Audio is resampled to this rate before analysis.
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct DeltaArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AbxArgs {
    #[arg(long)]
    pub deltas: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long, value_enum, default_value_t = GroupByArg::Contrast)]
    pub group_by: GroupByArg,
    /// Output CSV (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AbxDiffArgs {
    /// Scores of the model trained on the stimulus language.
    #[arg(long)]
    pub native: PathBuf,
    #[arg(long)]
    pub nonnative: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Penalty choice: a fixed `--lambda`, or cross-validation (the default).
#[derive(Debug, Clone, Args, Serialize)]
pub struct LambdaArgs {
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Select lambda by participant-stratified cross-validation (default).
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    /// Comma-separated lambda grid for cross-validation.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2, 1e-1, 1.0])]
    pub cv_grid: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbitArgs {
    #[arg(long)]
    pub deltas: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, default_value_t = GroupFilter::All)]
    pub language_group: GroupFilter,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SpearmanArgs {
    #[arg(long)]
    pub deltas: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Contrast)]
    pub level: LevelArg,
    #[arg(long, value_enum, default_value_t = GroupFilter::All)]
    pub language_group: GroupFilter,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct NativeEffectArgs {
    /// Δ of the model trained on French.
    #[arg(long)]
    pub deltas_fr: PathBuf,
    /// Δ of the model trained on English.
    #[arg(long)]
    pub deltas_en: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Contrast)]
    pub level: LevelArg,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[arg(long, value_enum)]
    pub metric: MetricKind,
    /// Δ table (ll, spearman).
    #[arg(long, required_if_eq_any = [("metric", "ll"), ("metric", "spearman")])]
    pub deltas: Option<PathBuf>,
    /// French-trained model Δ (native-effect).
    #[arg(long, required_if_eq("metric", "native-effect"))]
    pub deltas_fr: Option<PathBuf>,
    /// English-trained model Δ (native-effect).
    #[arg(long, required_if_eq("metric", "native-effect"))]
    pub deltas_en: Option<PathBuf>,
    /// Item table (spearman, native-effect).
    #[arg(long, required_if_eq_any = [("metric", "spearman"), ("metric", "native-effect")])]
    pub items: Option<PathBuf>,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Contrast)]
    pub level: LevelArg,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, default_value_t = GroupFilter::All)]
    pub language_group: GroupFilter,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write every replicate value.
    #[arg(long)]
    pub keep_replicates: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub metric: MetricKind,
    /// Model A Δ table; for native-effect give the French- then English-trained table.
    #[arg(long, num_args = 1..=2, required = true)]
    pub deltas_a: Vec<PathBuf>,
    #[arg(long, num_args = 1..=2, required = true)]
    pub deltas_b: Vec<PathBuf>,
    #[arg(long)]
    pub model_a: Option<String>,
    #[arg(long)]
    pub model_b: Option<String>,
    #[arg(long, required_if_eq_any = [("metric", "spearman"), ("metric", "native-effect")])]
    pub items: Option<PathBuf>,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Contrast)]
    pub level: LevelArg,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, default_value_t = GroupFilter::All)]
    pub language_group: GroupFilter,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Metric and comparison JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// ABX score tables as MODEL=scores.csv.
    #[arg(long = "abx", value_name = "MODEL=CSV")]
    pub abx: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write SVG bar charts.
    #[arg(long)]
    pub plots: bool,
}
