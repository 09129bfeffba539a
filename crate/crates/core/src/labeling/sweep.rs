use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binary_labels, multiclass_labels, MultiClassThresholds};
use crate::dataset::{ecdf_at, EncodedMatrix};
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{ModelParams, TargetTransform, Task};
use crate::rng;
use crate::table;
use crate::tuning::{cross_val_predict_folds, shuffled_folds};

/// Sweep rows whose F1 falls below this are flagged.
pub const F1_GATE: f64 = 0.75;
pub const DEFAULT_Q1: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
pub const DEFAULT_Q2: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// 20, 25, ..., 70 minutes.
pub fn default_tc_values() -> Vec<f64> {
    (0..11).map(|i| 20.0 + 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub n_folds: usize,
    pub seed: u64,
    pub f1_gate: f64,
    /// Cells with fewer records in some class are not evaluated.
    pub min_per_class: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_folds: 10,
            seed: 0,
            f1_gate: F1_GATE,
            min_per_class: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tc: f64,
    pub model: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub class_balance: f64,
    pub evaluable: bool,
    pub below_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub f1_gate: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Highest-F1 evaluable row; ties keep the earlier row.
    pub fn best(&self) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for r in self.rows.iter().filter(|r| r.f1.is_some()) {
            if best.is_none_or(|b| r.f1 > b.f1) {
                best = Some(r);
            }
        }
        best
    }

    /// Threshold values in row order, deduplicated.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.tc) {
                out.push(r.tc);
            }
        }
        out
    }

    pub fn warnings(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter_map(|r| {
                if !r.evaluable {
                    Some(format!("tc={} model={}: too few records in a class", r.tc, r.model))
                } else if r.below_gate {
                    Some(format!("tc={} model={}: F1 below {}", r.tc, r.model, self.f1_gate))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        table::to_csv_string(&self.rows)
    }
}

fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &l in labels {
        c[l] += 1;
    }
    c
}

/// Cross-validated class predictions over seeded shuffled folds.
pub fn classify_cv(
    x: &EncodedMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &ModelParams,
    opts: &SweepOptions,
) -> Result<Vec<usize>> {
    if labels.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), labels.len()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let folds = shuffled_folds(x.rows(), opts.n_folds, opts.seed);
    let pred = cross_val_predict_folds(
        params,
        &x.values,
        &x.feature_names,
        &y,
        Task::Classification { n_classes },
        TargetTransform::None,
        &folds,
        rng::derive_seed(opts.seed, &[0xC1A5]),
    )?;
    Ok(pred.into_iter().map(|p| p as usize).collect())
}

fn binary_cell(
    x: &EncodedMatrix,
    durations: &[f64],
    tc: f64,
    params: &ModelParams,
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let labels = binary_labels(durations, tc)?;
    let mut row = SweepRow {
        tc,
        model: params.kind().name().to_string(),
        precision: None,
        recall: None,
        accuracy: None,
        f1: None,
        class_balance: ecdf_at(durations, tc),
        evaluable: false,
        below_gate: false,
    };
    if class_counts(&labels, 2).iter().any(|&c| c < opts.min_per_class) || x.rows() < opts.n_folds {
        return Ok(row);
    }
    let pred = classify_cv(x, &labels, 2, params, opts)?;
    let s = metrics::classification_metrics(&labels, &pred, 1)?;
    row.precision = Some(s.precision);
    row.recall = Some(s.recall);
    row.accuracy = Some(s.accuracy);
    row.f1 = Some(s.f1);
    row.evaluable = true;
    row.below_gate = s.f1 < opts.f1_gate;
    Ok(row)
}

/// Binary classification at every `tc` for every model. Rows are ordered by
/// threshold, then by model as given.
pub fn threshold_sweep(
    x: &EncodedMatrix,
    durations: &[f64],
    models: &[ModelParams],
    tc_values: &[f64],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if durations.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), durations.len()));
    }
    let cells: Vec<(f64, &ModelParams)> = tc_values
        .iter()
        .flat_map(|&t| models.iter().map(move |m| (t, m)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|(tc, m)| binary_cell(x, durations, *tc, m, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        f1_gate: opts.f1_gate,
        rows,
    })
}

/// Cross-validated three-class F1-macro; `None` when a class has too few
/// records.
pub fn multiclass_cv(
    x: &EncodedMatrix,
    durations: &[f64],
    params: &ModelParams,
    thresholds: MultiClassThresholds,
    opts: &SweepOptions,
) -> Result<Option<f64>> {
    let labels = multiclass_labels(durations, thresholds)?;
    if class_counts(&labels, 3).iter().any(|&c| c < opts.min_per_class) || x.rows() < opts.n_folds {
        return Ok(None);
    }
    let pred = classify_cv(x, &labels, 3, params, opts)?;
    metrics::f1_macro(&labels, &pred, &[0, 1, 2]).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub q1: f64,
    pub q2: f64,
    pub t1: f64,
    pub t2: f64,
    pub f1_macro: Option<f64>,
}

/// Three-class F1-macro for every quantile pair with `q1 < q2`, in
/// lexicographic `(q1, q2)` order. Pairs whose quantiles coincide are kept
/// with no score.
pub fn quantile_grid(
    x: &EncodedMatrix,
    durations: &[f64],
    params: &ModelParams,
    q1_values: &[f64],
    q2_values: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<GridCell>> {
    let mut pairs = Vec::new();
    for &q1 in q1_values {
        for &q2 in q2_values {
            if q1 < q2 {
                pairs.push((q1, q2));
            }
        }
    }
    pairs
        .par_iter()
        .map(|&(q1, q2)| {
            let t1 = super::quantile(durations, q1)?;
            let t2 = super::quantile(durations, q2)?;
            let f1_macro = match MultiClassThresholds::new(t1, t2) {
                Ok(t) => multiclass_cv(x, durations, params, t, opts)?,
                Err(_) => None,
            };
            Ok(GridCell {
                q1,
                q2,
                t1,
                t2,
                f1_macro,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdoRow {
    pub threshold: f64,
    pub kept: usize,
    pub remaining_fraction: f64,
    pub best_model: Option<String>,
    pub best_f1: Option<f64>,
    /// More than half of the records were removed.
    pub flagged: bool,
}

/// Drops records shorter than each threshold and re-runs binary
/// classification at `tc`, reporting the best model's F1.
pub fn ldo_hdo_sweep(
    x: &EncodedMatrix,
    durations: &[f64],
    models: &[ModelParams],
    thresholds: &[f64],
    tc: f64,
    opts: &SweepOptions,
) -> Result<Vec<LdoRow>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("LDO thresholds must be ascending"));
    }
    let n = durations.len();
    thresholds
        .iter()
        .map(|&t| {
            let keep: Vec<usize> = (0..n).filter(|&i| durations[i] >= t).collect();
            let remaining_fraction = keep.len() as f64 / n as f64;
            let sub = x.select_rows(&keep);
            let d: Vec<f64> = keep.iter().map(|&i| durations[i]).collect();
            let report = threshold_sweep(&sub, &d, models, &[tc], opts)?;
            let best = report.best();
            Ok(LdoRow {
                threshold: t,
                kept: keep.len(),
                remaining_fraction,
                best_model: best.map(|r| r.model.clone()),
                best_f1: best.and_then(|r| r.f1),
                flagged: remaining_fraction < 0.5,
            })
        })
        .collect()
}
