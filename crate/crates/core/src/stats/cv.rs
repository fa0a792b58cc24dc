//! Penalty selection by participant-stratified cross-validation.
//!
//! Every participant's rows are shuffled and dealt round-robin across folds,
//! so each fold holds out a slice of every participant and the participant
//! coefficients stay estimable from the training part.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::design::DesignMatrix;
use super::probit::{fit_from, log_likelihood};
use super::{Result, StatsError};

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out log-likelihood per row, per grid value.
    pub scores: Vec<f64>,
    pub folds: usize,
    pub skipped_folds: usize,
}

/// Fold label per row.
fn assign_folds(row_participant: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_participants = row_participant.iter().max().map_or(0, |m| m + 1);
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); n_participants];
    for (i, &p) in row_participant.iter().enumerate() {
        rows_of[p].push(i);
    }
    let mut label = vec![0; row_participant.len()];
    for rows in &mut rows_of {
        rows.shuffle(&mut rng);
        let offset = rng.gen_range(0..folds);
        for (k, &i) in rows.iter().enumerate() {
            label[i] = (k + offset) % folds;
        }
    }
    label
}

fn one_class(y: &[bool], rows: &[usize]) -> bool {
    rows.iter().all(|&i| y[i]) || rows.iter().all(|&i| !y[i])
}

/// Picks the grid value with the best mean held-out log-likelihood per row;
/// ties go to the smaller penalty.
pub fn select_lambda_cv(design: &DesignMatrix, y: &[bool], grid: &[f64], folds: usize, seed: u64) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(StatsError::InvalidArgument("empty lambda grid".into()));
    }
    if folds < 2 {
        return Err(StatsError::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(StatsError::InvalidArgument(format!("lambda {bad} must be finite and >= 0")));
    }
    if design.n_rows() != y.len() {
        return Err(StatsError::LengthMismatch(design.n_rows(), y.len()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let label = assign_folds(design.row_participant(), folds, seed);
    let mut totals = vec![0.0; grid.len()];
    let mut used = 0;
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| label[i] == fold);
        if test.is_empty() || train.is_empty() || one_class(y, &test) || one_class(y, &train) {
            log::warn!("cross-validation fold {fold} has a single response class; skipped");
            continue;
        }
        used += 1;
        let train_x = design.select_rows(&train);
        let train_y: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let test_x = design.select_rows(&test);
        let test_y: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        // Largest penalty first; each fit warm-starts the next.
        let mut warm: Option<Vec<f64>> = None;
        for (g, &lambda) in grid.iter().enumerate().rev() {
            let fit = fit_from(&train_x, &train_y, lambda, warm.as_deref())?;
            totals[g] += log_likelihood(&fit.coefficients, &test_x, &test_y)? / test.len() as f64;
            warm = Some(fit.coefficients);
        }
    }
    if used == 0 {
        return Err(StatsError::DegenerateFolds);
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / used as f64).collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (g, &s)| if s > scores[best] { g } else { best });
    Ok(CvOutcome {
        lambda: grid[best],
        grid,
        scores,
        folds,
        skipped_folds: folds - used,
    })
}
