use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split_ab;
use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::labeling::binary_labels;
use crate::matrix::Matrix;
use crate::metrics;
use crate::models::{self, ModelKind, ModelParams, Predictor, TargetTransform, Task, TrainedModel};
use crate::rng;
use crate::tuning::{shuffled_folds, train_complement};

/// Column names of the meta-feature matrix, in order.
pub const META_FEATURES: [&str; 4] = ["predicted_class", "regressor_a", "regressor_b", "regressor_all"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub classifier: ModelParams,
    pub regressor_a: ModelParams,
    pub regressor_b: ModelParams,
    pub regressor_all: ModelParams,
    pub meta: ModelParams,
    /// Folds used to generate out-of-fold meta-features.
    pub inner_folds: usize,
    pub transform: TargetTransform,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            classifier: ModelParams::default_for(ModelKind::Gbt),
            regressor_a: ModelParams::default_for(ModelKind::Gbt),
            regressor_b: ModelParams::default_for(ModelKind::Gbt),
            regressor_all: ModelParams::default_for(ModelKind::Gbt),
            meta: ModelParams::default_for(ModelKind::Linear),
            inner_folds: 5,
            transform: TargetTransform::None,
        }
    }
}

/// Routes each record through the classifier to the subset regressor of its
/// predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub tc: f64,
    pub classifier: TrainedModel,
    pub regressor_a: TrainedModel,
    pub regressor_b: TrainedModel,
}

impl Predictor for PipelineModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        if self.classifier.predict_one(row) == 0.0 {
            self.regressor_a.predict_one(row)
        } else {
            self.regressor_b.predict_one(row)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub pipeline: PipelineModel,
    pub regressor_all: TrainedModel,
    pub meta: TrainedModel,
}

impl FusionModel {
    pub fn meta_features(&self, row: &[f64]) -> [f64; 4] {
        meta_row(&self.pipeline, &self.regressor_all, row)
    }
}

impl Predictor for FusionModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.meta.predict_one(&self.meta_features(row))
    }
}

fn meta_row(p: &PipelineModel, all: &TrainedModel, row: &[f64]) -> [f64; 4] {
    [
        p.classifier.predict_one(row),
        p.regressor_a.predict_one(row),
        p.regressor_b.predict_one(row),
        all.predict_one(row),
    ]
}

#[allow(clippy::too_many_arguments)]
fn fit_on(
    x: &Matrix,
    names: &[String],
    y: &[f64],
    rows: &[usize],
    params: &ModelParams,
    task: Task,
    transform: TargetTransform,
    seed: u64,
) -> Result<TrainedModel> {
    let ty: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    models::fit_matrix(params, &x.select_rows(rows), names, &ty, task, transform, seed)
}

fn pipeline_on(
    x: &Matrix,
    names: &[String],
    d: &[f64],
    rows: &[usize],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<PipelineModel> {
    let sub: Vec<f64> = rows.iter().map(|&i| d[i]).collect();
    let split = split_ab(&sub, tc)?;
    for (set, label) in [(&split.a, "A"), (&split.b, "B")] {
        if set.len() < 2 {
            return Err(Error::EmptySubset(format!(
                "pipeline: subset {label} has {} records at tc={tc}",
                set.len()
            )));
        }
    }
    let labels: Vec<f64> = binary_labels(d, tc)?.into_iter().map(|l| l as f64).collect();
    let a: Vec<usize> = split.a.iter().map(|&p| rows[p]).collect();
    let b: Vec<usize> = split.b.iter().map(|&p| rows[p]).collect();
    let t = config.transform;
    Ok(PipelineModel {
        tc,
        classifier: fit_on(
            x,
            names,
            &labels,
            rows,
            &config.classifier,
            Task::Classification { n_classes: 2 },
            TargetTransform::None,
            rng::derive_seed(seed, &[0]),
        )?,
        regressor_a: fit_on(
            x,
            names,
            d,
            &a,
            &config.regressor_a,
            Task::Regression,
            t,
            rng::derive_seed(seed, &[1]),
        )?,
        regressor_b: fit_on(
            x,
            names,
            d,
            &b,
            &config.regressor_b,
            Task::Regression,
            t,
            rng::derive_seed(seed, &[2]),
        )?,
    })
}

pub fn fit_pipeline(
    x: &EncodedMatrix,
    durations: &[f64],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<PipelineModel> {
    let rows: Vec<usize> = (0..durations.len()).collect();
    pipeline_on(&x.values, &x.feature_names, durations, &rows, config, tc, seed)
}

fn oof_on(
    x: &Matrix,
    names: &[String],
    d: &[f64],
    rows: &[usize],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<Matrix> {
    let folds = shuffled_folds(rows.len(), config.inner_folds, seed);
    let blocks = folds
        .par_iter()
        .enumerate()
        .map(|(k, test)| {
            let train: Vec<usize> = train_complement(rows.len(), test)
                .into_iter()
                .map(|p| rows[p])
                .collect();
            let s = rng::derive_seed(seed, &[0xF5, k as u64]);
            let p = pipeline_on(x, names, d, &train, config, tc, s)?;
            let all = fit_on(
                x,
                names,
                d,
                &train,
                &config.regressor_all,
                Task::Regression,
                config.transform,
                rng::derive_seed(s, &[3]),
            )?;
            Ok(test
                .iter()
                .map(|&q| (q, meta_row(&p, &all, x.row(rows[q]))))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Matrix::zeros(rows.len(), 4);
    for (q, m) in blocks.into_iter().flatten() {
        out.row_mut(q).copy_from_slice(&m);
    }
    Ok(out)
}

/// Meta-features for every record, each produced by base models fitted on
/// inner folds that exclude that record.
pub fn oof_meta_features(
    x: &EncodedMatrix,
    durations: &[f64],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<Matrix> {
    let rows: Vec<usize> = (0..durations.len()).collect();
    oof_on(&x.values, &x.feature_names, durations, &rows, config, tc, seed)
}

/// Fits the meta-regressor on a 4-column meta-feature matrix.
pub fn fit_meta(meta_x: &Matrix, durations: &[f64], config: &FusionConfig, seed: u64) -> Result<TrainedModel> {
    if meta_x.cols() != META_FEATURES.len() {
        return Err(Error::LengthMismatch(META_FEATURES.len(), meta_x.cols()));
    }
    let names: Vec<String> = META_FEATURES.iter().map(|s| s.to_string()).collect();
    models::fit_matrix(
        &config.meta,
        meta_x,
        &names,
        durations,
        Task::Regression,
        config.transform,
        seed,
    )
}

fn fusion_on(
    x: &Matrix,
    names: &[String],
    d: &[f64],
    rows: &[usize],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<FusionModel> {
    let meta_x = oof_on(x, names, d, rows, config, tc, rng::derive_seed(seed, &[0x0F]))?;
    let ty: Vec<f64> = rows.iter().map(|&i| d[i]).collect();
    Ok(FusionModel {
        pipeline: pipeline_on(x, names, d, rows, config, tc, seed)?,
        regressor_all: fit_on(
            x,
            names,
            d,
            rows,
            &config.regressor_all,
            Task::Regression,
            config.transform,
            rng::derive_seed(seed, &[3]),
        )?,
        meta: fit_meta(&meta_x, &ty, config, rng::derive_seed(seed, &[4]))?,
    })
}

pub fn fit_fusion(
    x: &EncodedMatrix,
    durations: &[f64],
    config: &FusionConfig,
    tc: f64,
    seed: u64,
) -> Result<FusionModel> {
    let rows: Vec<usize> = (0..durations.len()).collect();
    fusion_on(&x.values, &x.feature_names, durations, &rows, config, tc, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionFold {
    pub fold: usize,
    pub size: usize,
    pub fusion_rmse: f64,
    pub pipeline_rmse: f64,
    /// The all-data regressor on its own.
    pub single_rmse: f64,
}

/// Outer shuffled k-fold comparison of fusion, pipeline and the all-data
/// regressor.
pub fn fusion_cv(
    x: &EncodedMatrix,
    durations: &[f64],
    config: &FusionConfig,
    tc: f64,
    n_folds: usize,
    seed: u64,
) -> Result<Vec<FusionFold>> {
    let n = durations.len();
    if n != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), n));
    }
    let folds = shuffled_folds(n, n_folds, seed);
    folds
        .par_iter()
        .enumerate()
        .map(|(k, test)| {
            let train = train_complement(n, test);
            let f = fusion_on(
                &x.values,
                &x.feature_names,
                durations,
                &train,
                config,
                tc,
                rng::derive_seed(seed, &[0xFF, k as u64]),
            )?;
            let tx = x.values.select_rows(test);
            let actual: Vec<f64> = test.iter().map(|&i| durations[i]).collect();
            Ok(FusionFold {
                fold: k,
                size: test.len(),
                fusion_rmse: metrics::rmse(&actual, &f.predict_rows(&tx))?,
                pipeline_rmse: metrics::rmse(&actual, &f.pipeline.predict_rows(&tx))?,
                single_rmse: metrics::rmse(&actual, &f.regressor_all.predict_rows(&tx))?,
            })
        })
        .collect()
}
