//! L1-penalized probit regression.
//!
//! Maximizes `sum_i log Phi(s_i x_i'b) - lambda * sum_{j>0} |b_j|` with
//! `s_i = +1` for a correct response and `-1` otherwise. Each outer step
//! builds the exact Newton quadratic of the smooth part, minimizes the
//! penalized quadratic by cyclic coordinate descent, and backtracks along the
//! resulting direction until the penalized objective does not decrease.

use serde::Serialize;

use super::design::{Column, DesignMatrix};
use super::normal::{inverse_mills, norm_cdf, norm_sf};
use super::{Result, StatsError};

/// Row probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-12;

const COEF_TOL: f64 = 1e-8;
const MAX_ITER: usize = 1000;
const INNER_TOL: f64 = 1e-11;
const MAX_SWEEPS: usize = 500;
const MIN_WEIGHT: f64 = 1e-10;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitFit {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub lambda: f64,
    /// Unpenalized in-sample log-likelihood at `coefficients`.
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn sign(correct: bool) -> f64 {
    if correct {
        1.0
    } else {
        -1.0
    }
}

/// Clipped `log Phi(m)` and its derivative (zero where the clip is active).
fn row_terms(m: f64) -> (f64, f64) {
    let p = norm_cdf(m);
    if p < PROB_CLIP {
        (PROB_CLIP.ln(), 0.0)
    } else if p > 1.0 - PROB_CLIP {
        ((-PROB_CLIP).ln_1p(), 0.0)
    } else if m > 0.0 {
        ((-norm_sf(m)).ln_1p(), inverse_mills(m))
    } else {
        (p.ln(), inverse_mills(m))
    }
}

fn loglik_from_eta(eta: &[f64], y: &[bool]) -> f64 {
    eta.iter().zip(y).map(|(&e, &c)| row_terms(sign(c) * e).0).sum()
}

fn l1_penalty(beta: &[f64]) -> f64 {
    beta.iter().skip(1).map(|b| b.abs()).sum()
}

fn check_dims(design: &DesignMatrix, beta: &[f64], y: &[bool]) -> Result<()> {
    if design.n_rows() != y.len() {
        return Err(StatsError::LengthMismatch(design.n_rows(), y.len()));
    }
    if design.n_cols() != beta.len() {
        return Err(StatsError::LengthMismatch(design.n_cols(), beta.len()));
    }
    Ok(())
}

/// Unpenalized log-likelihood of `coefficients` on `design`; always <= 0.
pub fn log_likelihood(coefficients: &[f64], design: &DesignMatrix, y: &[bool]) -> Result<f64> {
    check_dims(design, coefficients, y)?;
    Ok(loglik_from_eta(&design.linear_predictor(coefficients), y))
}

pub fn penalized_objective(beta: &[f64], design: &DesignMatrix, y: &[bool], lambda: f64) -> Result<f64> {
    Ok(log_likelihood(beta, design, y)? - lambda * l1_penalty(beta))
}

/// Gradient of the smooth (log-likelihood) part.
pub fn smooth_gradient(beta: &[f64], design: &DesignMatrix, y: &[bool]) -> Result<Vec<f64>> {
    check_dims(design, beta, y)?;
    let eta = design.linear_predictor(beta);
    let per_row: Vec<f64> = eta
        .iter()
        .zip(y)
        .map(|(&e, &c)| sign(c) * row_terms(sign(c) * e).1)
        .collect();
    Ok(design.transpose_mul(&per_row))
}

/// Minimum-norm element of the penalized objective's superdifferential;
/// zero at an optimum.
pub fn penalized_gradient(beta: &[f64], design: &DesignMatrix, y: &[bool], lambda: f64) -> Result<Vec<f64>> {
    let g = smooth_gradient(beta, design, y)?;
    Ok(g.iter()
        .zip(beta)
        .enumerate()
        .map(|(j, (&gj, &bj))| {
            if j == 0 || lambda == 0.0 {
                gj
            } else if bj != 0.0 {
                gj - lambda * bj.signum()
            } else {
                gj.signum() * (gj.abs() - lambda).max(0.0)
            }
        })
        .collect())
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Minimizes `0.5 * sum w_i (z_i - x_i'b)^2 + lambda * |b_{1..}|_1` by
/// coordinate descent, starting from `beta`; `resid` holds `z - X beta`.
fn weighted_lasso(design: &DesignMatrix, w: &[f64], resid: &mut [f64], beta: &mut [f64], lambda: f64) {
    let curvature: Vec<f64> = design
        .columns()
        .iter()
        .map(|col| match col {
            Column::Dense(x) => x.iter().zip(w).map(|(a, wi)| wi * a * a).sum(),
            Column::Indicator(rows) => rows.iter().map(|&i| w[i]).sum(),
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for (j, col) in design.columns().iter().enumerate() {
            let h = curvature[j];
            let old = beta[j];
            let new = if h <= f64::MIN_POSITIVE {
                0.0
            } else {
                let score: f64 = match col {
                    Column::Dense(x) => x.iter().zip(w).zip(resid.iter()).map(|((a, wi), r)| wi * a * r).sum(),
                    Column::Indicator(rows) => rows.iter().map(|&i| w[i] * resid[i]).sum(),
                };
                let rho = score + h * old;
                if design.is_penalized(j) {
                    soft_threshold(rho, lambda) / h
                } else {
                    rho / h
                }
            };
            let diff = new - old;
            if diff != 0.0 {
                match col {
                    Column::Dense(x) => resid.iter_mut().zip(x).for_each(|(r, a)| *r -= a * diff),
                    Column::Indicator(rows) => rows.iter().for_each(|&i| resid[i] -= diff),
                }
                beta[j] = new;
                max_change = max_change.max(diff.abs());
            }
        }
        if max_change < INNER_TOL {
            break;
        }
    }
}

pub fn fit_probit_lasso(design: &DesignMatrix, y: &[bool], lambda: f64) -> Result<ProbitFit> {
    fit_from(design, y, lambda, None)
}

pub(crate) fn fit_from(design: &DesignMatrix, y: &[bool], lambda: f64, init: Option<&[f64]>) -> Result<ProbitFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(StatsError::InvalidArgument(format!("lambda {lambda} must be finite and >= 0")));
    }
    let p = design.n_cols();
    let mut beta = init.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    check_dims(design, &beta, y)?;

    let objective = |b: &[f64], eta: &[f64]| loglik_from_eta(eta, y) - lambda * l1_penalty(b);
    let mut eta = design.linear_predictor(&beta);
    let mut current = objective(&beta, &eta);
    let mut converged = false;
    let mut iterations = 0;

    let n = y.len();
    let mut w = vec![0.0; n];
    let mut resid = vec![0.0; n];
    while iterations < MAX_ITER {
        iterations += 1;
        for i in 0..n {
            let s = sign(y[i]);
            let m = s * eta[i];
            let mills = inverse_mills(m);
            let wi = (mills * (m + mills)).max(MIN_WEIGHT);
            w[i] = wi;
            resid[i] = s * mills / wi;
        }
        let mut proposal = beta.clone();
        weighted_lasso(design, &w, &mut resid, &mut proposal, lambda);
        let direction: Vec<f64> = proposal.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let step_size = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));

        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(&direction).map(|(b, d)| b + t * d).collect();
            let cand_eta = design.linear_predictor(&candidate);
            let value = objective(&candidate, &cand_eta);
            if value >= current {
                accepted = Some((candidate, cand_eta, value));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, cand_eta, value)) => {
                beta = candidate;
                eta = cand_eta;
                current = value;
                if t * step_size < COEF_TOL {
                    converged = true;
                    break;
                }
            }
            None => {
                // No ascent left at working precision.
                converged = step_size < COEF_TOL.sqrt();
                break;
            }
        }
    }

    Ok(ProbitFit {
        log_likelihood: loglik_from_eta(&eta, y),
        coefficients: beta,
        column_names: design.column_names().to_vec(),
        lambda,
        converged,
        iterations,
    })
}
