//! Participant bootstrap: intervals for a metric and paired model comparisons.
//!
//! A replicate draws, within each language group, as many participants as the
//! group has, with replacement, and keeps all responses of every draw. Repeat
//! draws of a participant are relabelled `{id}#{k}` so models with participant
//! effects see them as distinct listeners. Replicate `b` uses its own ChaCha8
//! stream seeded with `seed ^ b`, so results do not depend on scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{HumanResponse, LanguageGroup, Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric_name: String,
    /// Metric on the original data.
    pub point_estimate: f64,
    /// One entry per requested replicate; `None` where the metric was degenerate.
    pub bootstrap_values: Vec<Option<f64>>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseResult {
    /// metric(A) − metric(B) on the original data.
    pub difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    pub bootstrap_values: Vec<Option<f64>>,
    pub seed: u64,
    pub missing: usize,
}

/// Linear-interpolation percentile (`q` in [0, 1]) of sorted values.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(values: &[Option<f64>]) -> Result<(f64, f64, usize)> {
    let mut ok: Vec<f64> = values.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(StatsError::AllReplicatesDegenerate);
    }
    ok.sort_by(f64::total_cmp);
    Ok((percentile(&ok, 0.025), percentile(&ok, 0.975), values.len() - ok.len()))
}

/// Participants (with their responses) per language group, in sorted order.
struct Pool<'a> {
    groups: Vec<Vec<(&'a str, Vec<&'a HumanResponse>)>>,
}

impl<'a> Pool<'a> {
    fn new(responses: &'a [HumanResponse]) -> Result<Self> {
        if responses.is_empty() {
            return Err(StatsError::InvalidArgument("no responses to resample".into()));
        }
        let mut by_group: BTreeMap<LanguageGroup, BTreeMap<&str, Vec<&HumanResponse>>> = BTreeMap::new();
        for r in responses {
            by_group
                .entry(r.language_group)
                .or_default()
                .entry(r.participant_id.as_str())
                .or_default()
                .push(r);
        }
        Ok(Pool {
            groups: by_group.into_values().map(|g| g.into_iter().collect()).collect(),
        })
    }

    fn replicate(&self, seed: u64, b: usize) -> Vec<HumanResponse> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b as u64);
        let mut out = Vec::new();
        for group in &self.groups {
            let mut copies = vec![0usize; group.len()];
            for _ in 0..group.len() {
                let k = rng.gen_range(0..group.len());
                let (id, rows) = &group[k];
                let copy = copies[k];
                copies[k] += 1;
                out.extend(rows.iter().map(|&r| {
                    let mut r = r.clone();
                    if copy > 0 {
                        r.participant_id = format!("{id}#{copy}");
                    }
                    r
                }));
            }
        }
        out
    }
}

fn replicates<F>(responses: &[HumanResponse], n: usize, seed: u64, stat: F) -> Result<Vec<Option<f64>>>
where
    F: Fn(&[HumanResponse]) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(StatsError::InvalidArgument("replicate count must be at least 1".into()));
    }
    let pool = Pool::new(responses)?;
    Ok((0..n)
        .into_par_iter()
        .map(|b| match stat(&pool.replicate(seed, b)) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => None,
            Err(e) => {
                log::debug!("bootstrap replicate {b} degenerate: {e}");
                None
            }
        })
        .collect())
}

/// Percentile bootstrap of `metric` over participants.
pub fn bootstrap<F>(metric_name: &str, metric: F, responses: &[HumanResponse], n: usize, seed: u64) -> Result<MetricReport>
where
    F: Fn(&[HumanResponse]) -> Result<f64> + Sync,
{
    let point_estimate = metric(responses)?;
    let values = replicates(responses, n, seed, &metric)?;
    let (ci_low, ci_high, missing) = interval(&values)?;
    if missing > 0 {
        log::warn!("{metric_name}: {missing} of {n} bootstrap replicates were degenerate");
    }
    Ok(MetricReport {
        metric_name: metric_name.to_string(),
        point_estimate,
        bootstrap_values: values,
        ci_low,
        ci_high,
        seed,
        missing,
    })
}

/// Bootstraps metric(A) − metric(B) with both models scored on the same
/// resampled participants; significant iff the 95% interval excludes 0.
pub fn pairwise_significance<M, F>(
    metric: F,
    responses: &[HumanResponse],
    model_a: &M,
    model_b: &M,
    n: usize,
    seed: u64,
) -> Result<PairwiseResult>
where
    M: Sync + ?Sized,
    F: Fn(&[HumanResponse], &M) -> Result<f64> + Sync,
{
    let diff = |rs: &[HumanResponse]| Ok(metric(rs, model_a)? - metric(rs, model_b)?);
    let difference = diff(responses)?;
    let values = replicates(responses, n, seed, diff)?;
    let (ci_low, ci_high, missing) = interval(&values)?;
    Ok(PairwiseResult {
        difference,
        ci_low,
        ci_high,
        significant: ci_low > 0.0 || ci_high < 0.0,
        bootstrap_values: values,
        seed,
        missing,
    })
}
