use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{self, ModelParams, TargetTransform, Task};
use crate::rng;
use crate::tuning::train_complement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: usize,
    pub size: usize,
    pub min_duration: f64,
    pub max_duration: f64,
    pub rmse: f64,
}

/// Sorts records by duration (ties by index), cuts them into `n_groups`
/// contiguous groups of sizes differing by at most one, and scores each group
/// with a model trained on all the others.
pub fn quantiled_time_folding(
    x: &EncodedMatrix,
    durations: &[f64],
    params: &ModelParams,
    n_groups: usize,
    transform: TargetTransform,
    seed: u64,
) -> Result<Vec<GroupRow>> {
    let n = durations.len();
    if n != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), n));
    }
    if n_groups < 2 || n < n_groups {
        return Err(Error::param(format!(
            "need 2 <= n_groups <= N, got {n_groups} groups for {n} records"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]).then(a.cmp(&b)));
    (0..n_groups)
        .into_par_iter()
        .map(|g| {
            let mut test: Vec<usize> = order[g * n / n_groups..(g + 1) * n / n_groups].to_vec();
            test.sort_unstable();
            let train = train_complement(n, &test);
            let ty: Vec<f64> = train.iter().map(|&i| durations[i]).collect();
            let m = models::fit(
                params,
                &x.select_rows(&train),
                &ty,
                Task::Regression,
                transform,
                rng::derive_seed(seed, &[0x7F, g as u64]),
            )?;
            let pred = m.predict(&x.select_rows(&test))?;
            let actual: Vec<f64> = test.iter().map(|&i| durations[i]).collect();
            Ok(GroupRow {
                group: g,
                size: test.len(),
                min_duration: actual.iter().copied().fold(f64::INFINITY, f64::min),
                max_duration: actual.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                rmse: metrics::rmse(&actual, &pred)?,
            })
        })
        .collect()
}
