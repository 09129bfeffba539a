//! Fold construction, randomised hyper-parameter search and the intra/extra
//! joint optimisation of model and outlier-removal hyper-parameters.

mod cv;
mod ieo;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::models::Task;

pub use cv::{cross_val_predict, cross_val_predict_folds, shuffled_folds, train_complement};
pub use ieo::{
    evaluate_draw, iteration_curve, run_ieo, CurveRow, DrawOutcome, DrawRecord, FinalCv, IeoInput, IeoResult,
    ValidationResult, ITERATION_COUNTS,
};
pub use space::{sample_draw, HyperDraw, HyperSpace, ModelSpace, OrmSpace};

/// Where outlier removal happens relative to fold rotation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrmMode {
    #[default]
    None,
    /// Inside each training fold; test folds are never scored or filtered.
    Intra,
    /// Once on the train/test part before folds are formed.
    Extra,
}

impl OrmMode {
    pub fn name(&self) -> &'static str {
        match self {
            OrmMode::None => "none",
            OrmMode::Intra => "intra",
            OrmMode::Extra => "extra",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mape,
    Rmse,
    F1,
}

impl Metric {
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Metric::F1)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mape => "mape",
            Metric::Rmse => "rmse",
            Metric::F1 => "f1",
        }
    }

    /// Scores predictions against targets. MAPE skips zero actuals; `None`
    /// means nothing was left to score. F1 is binary (positive class 1) for
    /// two classes and macro-averaged otherwise.
    pub fn score(&self, task: Task, actual: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
        match (self, task) {
            (Metric::Mape, Task::Regression) => Ok(metrics::mape_excluding_zero(actual, predicted)?.0),
            (Metric::Rmse, Task::Regression) => metrics::rmse(actual, predicted).map(Some),
            (Metric::F1, Task::Classification { n_classes }) => {
                let a: Vec<usize> = actual.iter().map(|&v| v as usize).collect();
                let p: Vec<usize> = predicted.iter().map(|&v| v as usize).collect();
                if n_classes == 2 {
                    Ok(Some(metrics::classification_metrics(&a, &p, 1)?.f1))
                } else {
                    let classes: Vec<usize> = (0..n_classes).collect();
                    metrics::f1_macro(&a, &p, &classes).map(Some)
                }
            }
            _ => Err(Error::param(format!(
                "metric {} does not fit task {task:?}",
                self.name()
            ))),
        }
    }

    /// True when `a` is strictly better than `b`; `None` is worst.
    pub fn better(&self, a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(_), None) => true,
            (None, _) => false,
            (Some(a), Some(b)) => {
                if self.higher_is_better() {
                    a > b
                } else {
                    a < b
                }
            }
        }
    }
}

/// Cross-validation and search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    #[serde(default)]
    pub mode: OrmMode,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub target_transform: crate::models::TargetTransform,
    /// Fraction of records (taken from the end) held out for validation.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// When set, the best draw is re-evaluated with this many folds.
    #[serde(default)]
    pub report_folds: Option<usize>,
}

fn default_holdout() -> f64 {
    0.2
}

impl CvPlan {
    pub fn new(n_folds: usize, mode: OrmMode, iterations: usize, seed: u64) -> Self {
        CvPlan {
            n_folds,
            mode,
            iterations,
            seed,
            target_transform: Default::default(),
            holdout_fraction: default_holdout(),
            report_folds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::param("n_folds must be >= 2"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::param("holdout_fraction must lie in [0, 1)"));
        }
        if matches!(self.report_folds, Some(f) if f < 2) {
            return Err(Error::param("report_folds must be >= 2"));
        }
        Ok(())
    }
}

/// Sequential contiguous folds: the test block of fold `k` is
/// `[floor(k n / F), floor((k + 1) n / F))` and training is the complement.
pub fn fold_indexes(n: usize, n_folds: usize, k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_folds == 0 || k >= n_folds || n_folds > n {
        return Err(Error::param(format!(
            "need 0 <= k < F <= n, got k={k}, F={n_folds}, n={n}"
        )));
    }
    let lo = k * n / n_folds;
    let hi = (k + 1) * n / n_folds;
    let train = (0..lo).chain(hi..n).collect();
    Ok((train, (lo..hi).collect()))
}
