//! Anomaly scoring and percentage-based record removal.
//!
//! Scores follow one convention: higher means more anomalous. Records are
//! scored on their encoded features together with `ln(1 + duration)`, all
//! columns z-scored on the scored subset.

mod iforest;
mod lof;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use iforest::{average_path_length, isolation_forest_scores, IsolationForestParams};
pub use lof::{lof_scores, LOF_LRD_CAP};

/// Upper bound on the fraction of records an outlier-removal step may drop.
pub const MAX_REMOVAL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrmMethod {
    IsolationForest,
    Lof,
}

impl OrmMethod {
    pub fn name(&self) -> &'static str {
        match self {
            OrmMethod::IsolationForest => "isolation-forest",
            OrmMethod::Lof => "lof",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScores {
    pub scores: Vec<f64>,
    pub method: OrmMethod,
    pub params: serde_json::Value,
    /// LOF only: points whose local reachability density hit the cap.
    #[serde(default)]
    pub capped: usize,
}

/// Outlier-removal configuration; one draw of the ORM search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrmParams {
    pub method: OrmMethod,
    /// Fraction of records removed, within [0, 0.05].
    pub percent_removed: f64,
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default = "default_subsample")]
    pub subsample_size: usize,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_trees() -> usize {
    100
}
fn default_subsample() -> usize {
    256
}
fn default_k() -> usize {
    20
}

impl OrmParams {
    pub fn new(method: OrmMethod, percent_removed: f64) -> Self {
        OrmParams {
            method,
            percent_removed,
            n_trees: default_trees(),
            subsample_size: default_subsample(),
            k: default_k(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_REMOVAL_FRACTION + 1e-12).contains(&self.percent_removed) {
            return Err(Error::param(format!(
                "percent_removed must lie in [0, {MAX_REMOVAL_FRACTION}], got {}",
                self.percent_removed
            )));
        }
        match self.method {
            OrmMethod::IsolationForest if self.n_trees == 0 || self.subsample_size < 2 => Err(Error::param(
                "isolation forest needs n_trees >= 1 and subsample_size >= 2",
            )),
            OrmMethod::Lof if self.k < 2 => Err(Error::param("LOF needs k >= 2")),
            _ => Ok(()),
        }
    }
}

/// Indices kept after dropping `floor(percent * n)` highest scores. Ties
/// drop the lower row index first. The result is sorted.
pub fn remove_top_percent(scores: &[f64], percent: f64) -> Vec<usize> {
    let n = scores.len();
    let drop = removal_count(n, percent);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept = order.split_off(drop);
    kept.sort_unstable();
    kept
}

/// `floor(percent * n)`, robust to representation error in `percent`.
pub fn removal_count(n: usize, percent: f64) -> usize {
    ((percent.clamp(0.0, 1.0) * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Matrix the outlier scorers see: features plus ln(1 + duration), z-scored.
pub fn orm_matrix(features: &Matrix, durations: &[f64]) -> Matrix {
    let log_d: Vec<f64> = durations.iter().map(|d| d.ln_1p()).collect();
    features.with_column(&log_d).standardized()
}

pub fn score(x: &Matrix, params: &OrmParams, seed: u64) -> Result<AnomalyScores> {
    params.validate()?;
    match params.method {
        OrmMethod::IsolationForest => isolation_forest_scores(
            x,
            &IsolationForestParams {
                n_trees: params.n_trees,
                subsample_size: params.subsample_size,
            },
            seed,
        ),
        OrmMethod::Lof => lof_scores(x, params.k.min(x.rows().saturating_sub(1)).max(2)),
    }
}

/// Runs one removal step on the records `rows` of `features` / `durations`,
/// dropping `fraction` of them. Returns the kept subset of `rows`.
pub fn filter_rows(
    features: &Matrix,
    durations: &[f64],
    rows: &[usize],
    params: &OrmParams,
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if removal_count(rows.len(), fraction) == 0 {
        return Ok(rows.to_vec());
    }
    let sub = features.select_rows(rows);
    let d: Vec<f64> = rows.iter().map(|&i| durations[i]).collect();
    let scores = score(&orm_matrix(&sub, &d), params, seed)?;
    Ok(remove_top_percent(&scores.scores, fraction)
        .into_iter()
        .map(|p| rows[p])
        .collect())
}
