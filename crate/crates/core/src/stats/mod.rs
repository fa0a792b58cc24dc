//! Statistics that compare model deltas with listener behaviour: probit-lasso
//! log-likelihood, rank and product-moment correlations, the native-language
//! effect, and the participant bootstrap used for intervals and pairwise tests.

mod aggregate;
mod bootstrap;
mod cv;
mod design;
mod metrics;
mod native;
mod normal;
mod probit;
mod rank;

pub use aggregate::{aggregate, Level, PairedVectors, Unit};
pub use bootstrap::{bootstrap, pairwise_significance, percentile, MetricReport, PairwiseResult};
pub use cv::{select_lambda_cv, CvOutcome, DEFAULT_FOLDS, DEFAULT_LAMBDA_GRID};
pub use design::{build_design_matrix, Column, DesignMatrix};
pub use metrics::{ll_metric, native_effect_metric, probit_fit, spearman_metric, LambdaPolicy, ProbitOutcome};
pub use native::{native_effect, normalize_by_sd, NativeEffect};
pub use normal::{log_norm_cdf, norm_cdf, norm_pdf, norm_sf};
pub use probit::{
    fit_probit_lasso, log_likelihood, penalized_gradient, penalized_objective, smooth_gradient, ProbitFit,
    PROB_CLIP,
};
pub use rank::{fractional_ranks, pearson, spearman};

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abx::{self, column_positions, parse_bool, row_number, AbxError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Table(#[from] AbxError),
    #[error("no delta for triplet {0:?}")]
    MissingDelta(String),
    #[error("triplet {0:?} is not in the item table")]
    UnknownTriplet(String),
    #[error("need at least 2 responses, got {0}")]
    TooFewResponses(usize),
    #[error("degenerate constant {0}: zero variance")]
    DegenerateConstant(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} values, got {got}")]
    TooShort { got: usize, min: usize },
    #[error("fewer than 3 units common to all four sides ({0})")]
    TooFewUnits(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("every cross-validation fold was degenerate")]
    DegenerateFolds,
    #[error("every bootstrap replicate was degenerate")]
    AllReplicatesDegenerate,
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageGroup {
    French,
    English,
}

impl LanguageGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            LanguageGroup::French => "french",
            LanguageGroup::English => "english",
        }
    }
}

impl fmt::Display for LanguageGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "french" | "fr" => Ok(LanguageGroup::French),
            "english" | "en" => Ok(LanguageGroup::English),
            other => Err(format!("unknown language group {other:?}")),
        }
    }
}

/// One participant's answer to one triplet presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanResponse {
    pub participant_id: String,
    pub triplet_id: String,
    pub target_is_a: bool,
    /// 1-based position in the participant's experimental list.
    pub trial_index: u32,
    pub correct: bool,
    /// Graded answer on the accuracy scale, when the subset collected one.
    pub gradient: Option<f64>,
    pub subset: String,
    pub language_group: LanguageGroup,
}

impl HumanResponse {
    /// Value entering accuracy averages: the gradient answer when present,
    /// otherwise 1 for correct and 0 for incorrect.
    pub fn accuracy_value(&self) -> f64 {
        self.gradient.unwrap_or(if self.correct { 1.0 } else { 0.0 })
    }
}

pub const RESPONSE_COLUMNS: [&str; 8] = [
    "participant_id",
    "triplet_id",
    "target_is_A",
    "trial_index",
    "correct",
    "gradient",
    "subset",
    "language_group",
];

pub fn read_responses<R: Read>(reader: R) -> Result<Vec<HumanResponse>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(AbxError::from)?.clone();
    let cols = column_positions(&headers, &RESPONSE_COLUMNS)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(AbxError::from)?;
        let row = row_number(&record);
        let f = |k: usize| record.get(cols[k]).unwrap_or("");
        let bad = |reason: String| StatsError::Table(AbxError::BadRow { row, reason });
        let boolean = |k: usize| {
            parse_bool(f(k)).ok_or_else(|| bad(format!("{} {:?} is not a boolean", RESPONSE_COLUMNS[k], f(k))))
        };
        let trial_index: u32 = f(3)
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| bad(format!("trial_index {:?} is not a positive integer", f(3))))?;
        let gradient = match f(5) {
            "" => None,
            g => Some(
                g.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("gradient {g:?} is not a finite number")))?,
            ),
        };
        let response = HumanResponse {
            participant_id: f(0).to_string(),
            triplet_id: f(1).to_string(),
            target_is_a: boolean(2)?,
            trial_index,
            correct: boolean(4)?,
            gradient,
            subset: f(6).to_string(),
            language_group: f(7).parse().map_err(bad)?,
        };
        if response.participant_id.is_empty() || response.triplet_id.is_empty() {
            return Err(bad("empty participant_id or triplet_id".into()));
        }
        out.push(response);
    }
    if out.is_empty() {
        return Err(StatsError::Table(AbxError::Empty));
    }
    Ok(out)
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<HumanResponse>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AbxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_responses(file)
}

/// Responses of one participant group.
pub fn responses_of(responses: &[HumanResponse], group: LanguageGroup) -> Vec<HumanResponse> {
    responses.iter().filter(|r| r.language_group == group).cloned().collect()
}

/// Number of distinct participants.
pub fn participant_count(responses: &[HumanResponse]) -> usize {
    responses.iter().map(|r| r.participant_id.as_str()).collect::<HashSet<_>>().len()
}

/// Population mean and standard deviation (divides by N).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// Re-exported so callers of the stats API do not need to reach into abx.
pub use abx::{Contrast, TripletItem};
