//! Probit design matrix: intercept, standardized delta, answer-is-A, standardized
//! trial order, and one-hot participant and subset blocks with the
//! lexicographically first level of each dropped.

use std::collections::{BTreeSet, HashMap};

use super::{mean_sd, HumanResponse, Result, StatsError};

/// A design column. One-hot columns are stored as the rows where they are 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Dense(Vec<f64>),
    Indicator(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    columns: Vec<Column>,
    column_names: Vec<String>,
    /// Participant index per row, for stratified resampling of rows.
    row_participant: Vec<usize>,
}

impl DesignMatrix {
    pub fn from_columns(n_rows: usize, named: Vec<(String, Column)>, row_participant: Vec<usize>) -> Self {
        assert_eq!(row_participant.len(), n_rows);
        let (column_names, columns) = named.into_iter().unzip();
        DesignMatrix {
            n_rows,
            columns,
            column_names,
            row_participant,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn row_participant(&self) -> &[usize] {
        &self.row_participant
    }

    /// Column 0 is the unpenalized intercept.
    pub fn is_penalized(&self, j: usize) -> bool {
        j != 0
    }

    pub fn dense_column(&self, j: usize) -> Vec<f64> {
        match &self.columns[j] {
            Column::Dense(v) => v.clone(),
            Column::Indicator(rows) => {
                let mut v = vec![0.0; self.n_rows];
                rows.iter().for_each(|&i| v[i] = 1.0);
                v
            }
        }
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n_rows];
        for (col, &b) in self.columns.iter().zip(beta) {
            if b == 0.0 {
                continue;
            }
            match col {
                Column::Dense(v) => eta.iter_mut().zip(v).for_each(|(e, x)| *e += x * b),
                Column::Indicator(rows) => rows.iter().for_each(|&i| eta[i] += b),
            }
        }
        eta
    }

    /// `X^T v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| match col {
                Column::Dense(x) => x.iter().zip(v).map(|(a, b)| a * b).sum(),
                Column::Indicator(rows) => rows.iter().map(|&i| v[i]).sum(),
            })
            .collect()
    }

    /// Keeps the given rows (in the given order); columns are not re-standardized.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut new_index = vec![usize::MAX; self.n_rows];
        for (k, &i) in rows.iter().enumerate() {
            new_index[i] = k;
        }
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Dense(v) => Column::Dense(rows.iter().map(|&i| v[i]).collect()),
                Column::Indicator(ones) => {
                    let mut kept: Vec<usize> =
                        ones.iter().map(|&i| new_index[i]).filter(|&k| k != usize::MAX).collect();
                    kept.sort_unstable();
                    Column::Indicator(kept)
                }
            })
            .collect();
        DesignMatrix {
            n_rows: rows.len(),
            columns,
            column_names: self.column_names.clone(),
            row_participant: rows.iter().map(|&i| self.row_participant[i]).collect(),
        }
    }
}

fn standardize(values: &mut [f64]) -> Option<()> {
    let (mean, sd) = mean_sd(values);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return None;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Some(())
}

fn one_hot<'a>(labels: impl Iterator<Item = &'a str> + Clone, prefix: &str) -> Vec<(String, Column)> {
    let levels: BTreeSet<&str> = labels.clone().collect();
    levels
        .into_iter()
        .skip(1)
        .map(|level| {
            let rows = labels
                .clone()
                .enumerate()
                .filter(|(_, l)| *l == level)
                .map(|(i, _)| i)
                .collect();
            (format!("{prefix}[{level}]"), Column::Indicator(rows))
        })
        .collect()
}

pub fn build_design_matrix(responses: &[HumanResponse], deltas: &HashMap<String, f64>) -> Result<DesignMatrix> {
    if responses.len() < 2 {
        return Err(StatsError::TooFewResponses(responses.len()));
    }
    let n = responses.len();
    let mut delta: Vec<f64> = responses
        .iter()
        .map(|r| {
            deltas
                .get(&r.triplet_id)
                .copied()
                .ok_or_else(|| StatsError::MissingDelta(r.triplet_id.clone()))
        })
        .collect::<Result<_>>()?;
    standardize(&mut delta).ok_or_else(|| StatsError::DegenerateConstant("predictor delta".into()))?;

    let mut trial: Vec<f64> = responses.iter().map(|r| r.trial_index as f64).collect();
    if standardize(&mut trial).is_none() {
        // Constant trial order carries no information; centre it to zero.
        trial.iter_mut().for_each(|t| *t = 0.0);
    }
    let answer_a: Vec<f64> = responses.iter().map(|r| if r.target_is_a { 1.0 } else { 0.0 }).collect();

    let mut named = vec![
        ("intercept".to_string(), Column::Dense(vec![1.0; n])),
        ("delta".to_string(), Column::Dense(delta)),
        ("answer_is_a".to_string(), Column::Dense(answer_a)),
        ("trial_index".to_string(), Column::Dense(trial)),
    ];
    named.extend(one_hot(responses.iter().map(|r| r.participant_id.as_str()), "participant"));
    named.extend(one_hot(responses.iter().map(|r| r.subset.as_str()), "subset"));

    let participants: Vec<&str> = responses
        .iter()
        .map(|r| r.participant_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let row_participant = responses
        .iter()
        .map(|r| participants.binary_search(&r.participant_id.as_str()).unwrap())
        .collect();
    Ok(DesignMatrix::from_columns(n, named, row_participant))
}
