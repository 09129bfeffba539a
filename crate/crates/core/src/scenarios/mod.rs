//! Train/test extrapolation scenarios over the short-term (A) and long-term
//! (B) subsets, duration-sorted folding, and the pipeline and fusion
//! composites.

mod folding;
mod fusion;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{self, ModelParams, TargetTransform, Task};
use crate::rng;
use crate::tuning::{cross_val_predict_folds, shuffled_folds};

pub use folding::{quantiled_time_folding, GroupRow};
pub use fusion::{
    fit_fusion, fit_meta, fit_pipeline, fusion_cv, oof_meta_features, FusionConfig, FusionFold, FusionModel,
    PipelineModel, META_FEATURES,
};

/// Records split at `tc`: A holds `y <= tc`, B holds `y > tc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbSplit {
    pub tc: f64,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl AbSplit {
    pub fn a_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn b_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.a_empty() {
            w.push(format!("subset A is empty at tc={}", self.tc));
        }
        if self.b_empty() {
            w.push(format!("subset B is empty at tc={}", self.tc));
        }
        w
    }
}

pub fn split_ab(durations: &[f64], tc: f64) -> Result<AbSplit> {
    if tc.is_nan() || tc <= 0.0 {
        return Err(Error::param(format!("tc must be > 0, got {tc}")));
    }
    let (a, b) = (0..durations.len()).partition(|&i| durations[i] <= tc);
    Ok(AbSplit { tc, a, b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioName {
    AlltoAll,
    AtoA,
    AtoB,
    BtoA,
    BtoB,
    AlltoA,
    AlltoB,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::AlltoAll,
        ScenarioName::AtoA,
        ScenarioName::AtoB,
        ScenarioName::BtoA,
        ScenarioName::BtoB,
        ScenarioName::AlltoA,
        ScenarioName::AlltoB,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioName::AlltoAll => "AlltoAll",
            ScenarioName::AtoA => "AtoA",
            ScenarioName::AtoB => "AtoB",
            ScenarioName::BtoA => "BtoA",
            ScenarioName::BtoB => "BtoB",
            ScenarioName::AlltoA => "AlltoA",
            ScenarioName::AlltoB => "AlltoB",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOptions {
    pub n_folds: usize,
    pub seed: u64,
    pub transform: TargetTransform,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            n_folds: 10,
            seed: 0,
            transform: TargetTransform::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub tc: f64,
    pub params: ModelParams,
    pub options: ScenarioOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: ScenarioName,
    pub model: String,
    pub mape: Option<f64>,
    /// Zero-duration test records left out of MAPE.
    pub mape_excluded: usize,
    pub rmse: f64,
    pub train_size: usize,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<f64>,
}

fn regress_cv(
    x: &EncodedMatrix,
    y: &[f64],
    rows: &[usize],
    params: &ModelParams,
    opts: &ScenarioOptions,
) -> Result<Vec<f64>> {
    if rows.len() < opts.n_folds.max(2) {
        return Err(Error::param(format!(
            "{} records cannot form {} folds",
            rows.len(),
            opts.n_folds
        )));
    }
    let sub = x.values.select_rows(rows);
    let ty: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let folds = shuffled_folds(rows.len(), opts.n_folds, opts.seed);
    cross_val_predict_folds(
        params,
        &sub,
        &x.feature_names,
        &ty,
        Task::Regression,
        opts.transform,
        &folds,
        rng::derive_seed(opts.seed, &[0x5CE0]),
    )
}

fn fit_predict(
    x: &EncodedMatrix,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    params: &ModelParams,
    opts: &ScenarioOptions,
) -> Result<Vec<f64>> {
    let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let m = models::fit(
        params,
        &x.select_rows(train),
        &ty,
        Task::Regression,
        opts.transform,
        rng::derive_seed(opts.seed, &[0x5CE1]),
    )?;
    m.predict(&x.select_rows(test))
}

/// Runs one scenario. Cross-subset scenarios fit on the whole source subset
/// and predict the whole target subset; the others use shuffled k-fold CV
/// within the training population, with AlltoA and AlltoB scored only on
/// test records of the target subset.
pub fn run_scenario(x: &EncodedMatrix, durations: &[f64], spec: &ScenarioSpec) -> Result<ScenarioResult> {
    if durations.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), durations.len()));
    }
    let split = split_ab(durations, spec.tc)?;
    let all: Vec<usize> = (0..durations.len()).collect();
    let need = |set: &[usize], label: &str| {
        if set.is_empty() {
            Err(Error::EmptySubset(format!(
                "{}: subset {label} is empty at tc={}",
                spec.name, spec.tc
            )))
        } else {
            Ok(())
        }
    };
    let o = &spec.options;
    let (test, predictions, train_size) = match spec.name {
        ScenarioName::AtoB | ScenarioName::BtoA => {
            let (src, dst) = if spec.name == ScenarioName::AtoB {
                (&split.a, &split.b)
            } else {
                (&split.b, &split.a)
            };
            need(&split.a, "A")?;
            need(&split.b, "B")?;
            (
                dst.clone(),
                fit_predict(x, durations, src, dst, &spec.params, o)?,
                src.len(),
            )
        }
        ScenarioName::AtoA | ScenarioName::BtoB | ScenarioName::AlltoAll => {
            let rows = match spec.name {
                ScenarioName::AtoA => &split.a,
                ScenarioName::BtoB => &split.b,
                _ => &all,
            };
            need(rows, if spec.name == ScenarioName::BtoB { "B" } else { "A" })?;
            let p = regress_cv(x, durations, rows, &spec.params, o)?;
            let train = rows.len() - rows.len() / o.n_folds;
            (rows.clone(), p, train)
        }
        ScenarioName::AlltoA | ScenarioName::AlltoB => {
            let target = if spec.name == ScenarioName::AlltoA {
                &split.a
            } else {
                &split.b
            };
            need(target, if spec.name == ScenarioName::AlltoA { "A" } else { "B" })?;
            let p = regress_cv(x, durations, &all, &spec.params, o)?;
            (
                target.clone(),
                target.iter().map(|&i| p[i]).collect(),
                all.len() - all.len() / o.n_folds,
            )
        }
    };
    let actual: Vec<f64> = test.iter().map(|&i| durations[i]).collect();
    let (mape, mape_excluded) = metrics::mape_excluding_zero(&actual, &predictions)?;
    Ok(ScenarioResult {
        name: spec.name,
        model: spec.params.kind().name().to_string(),
        mape,
        mape_excluded,
        rmse: metrics::rmse(&actual, &predictions)?,
        train_size,
        test_indices: test,
        predictions,
    })
}

/// Every (scenario, model) pair, scenario-major, evaluated in parallel.
pub fn run_scenarios(
    x: &EncodedMatrix,
    durations: &[f64],
    tc: f64,
    scenarios: &[ScenarioName],
    models: &[ModelParams],
    options: &ScenarioOptions,
) -> Result<Vec<ScenarioResult>> {
    let specs: Vec<ScenarioSpec> = scenarios
        .iter()
        .flat_map(|&name| {
            models.iter().map(move |p| ScenarioSpec {
                name,
                tc,
                params: *p,
                options: options.clone(),
            })
        })
        .collect();
    specs.par_iter().map(|s| run_scenario(x, durations, s)).collect()
}

/// CSV shaped as scenarios x models with MAPE cells.
pub fn scenario_table(results: &[ScenarioResult]) -> Result<String> {
    let mut models: Vec<&str> = Vec::new();
    let mut names: Vec<ScenarioName> = Vec::new();
    for r in results {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if !names.contains(&r.name) {
            names.push(r.name);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("scenario").chain(models.iter().copied()))?;
    for n in names {
        let mut rec = vec![n.name().to_string()];
        for m in &models {
            let cell = results
                .iter()
                .find(|r| r.name == n && r.model == *m)
                .and_then(|r| r.mape)
                .map(|v| v.to_string())
                .unwrap_or_default();
            rec.push(cell);
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}
