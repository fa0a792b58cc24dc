//! The three model-vs-human metrics as pure functions of a response set, in
//! the shape the bootstrap expects.

use std::collections::HashMap;

use serde::Serialize;

use super::aggregate::{aggregate, Level};
use super::cv::{select_lambda_cv, CvOutcome, DEFAULT_FOLDS, DEFAULT_LAMBDA_GRID};
use super::design::build_design_matrix;
use super::native::native_effect;
use super::probit::{fit_probit_lasso, ProbitFit};
use super::rank::spearman;
use super::{responses_of, HumanResponse, LanguageGroup, Result};
use crate::abx::TripletItem;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum LambdaPolicy {
    Fixed { lambda: f64 },
    CrossValidated { grid: Vec<f64>, folds: usize, seed: u64 },
}

impl LambdaPolicy {
    pub fn cross_validated(seed: u64) -> Self {
        LambdaPolicy::CrossValidated {
            grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitOutcome {
    pub fit: ProbitFit,
    pub cv: Option<CvOutcome>,
}

/// Fits the probit lasso of binary responses on Δ and nuisance predictors.
pub fn probit_fit(
    responses: &[HumanResponse],
    deltas: &HashMap<String, f64>,
    policy: &LambdaPolicy,
) -> Result<ProbitOutcome> {
    let design = build_design_matrix(responses, deltas)?;
    let y: Vec<bool> = responses.iter().map(|r| r.correct).collect();
    let cv = match policy {
        LambdaPolicy::Fixed { .. } => None,
        LambdaPolicy::CrossValidated { grid, folds, seed } => Some(select_lambda_cv(&design, &y, grid, *folds, *seed)?),
    };
    let lambda = match (policy, &cv) {
        (LambdaPolicy::Fixed { lambda }, _) => *lambda,
        (_, Some(cv)) => cv.lambda,
        _ => unreachable!(),
    };
    let fit = fit_probit_lasso(&design, &y, lambda)?;
    if !fit.converged {
        log::warn!("probit fit did not converge after {} iterations", fit.iterations);
    }
    Ok(ProbitOutcome { fit, cv })
}

/// In-sample log-likelihood of the fitted probit.
pub fn ll_metric(responses: &[HumanResponse], deltas: &HashMap<String, f64>, policy: &LambdaPolicy) -> Result<f64> {
    Ok(probit_fit(responses, deltas, policy)?.fit.log_likelihood)
}

/// Spearman ρ between mean Δ and mean human accuracy per unit.
pub fn spearman_metric(
    level: Level,
    items: &[TripletItem],
    deltas: &HashMap<String, f64>,
    responses: &[HumanResponse],
) -> Result<f64> {
    let pv = aggregate(level, deltas, items, responses)?;
    spearman(&pv.model, &pv.human)
}

/// Native-language-effect r; `responses` holds both listener groups.
pub fn native_effect_metric(
    level: Level,
    items: &[TripletItem],
    deltas_fr_model: &HashMap<String, f64>,
    deltas_en_model: &HashMap<String, f64>,
    responses: &[HumanResponse],
) -> Result<f64> {
    let fr = responses_of(responses, LanguageGroup::French);
    let en = responses_of(responses, LanguageGroup::English);
    Ok(native_effect(level, items, deltas_fr_model, deltas_en_model, &fr, &en)?.r)
}
