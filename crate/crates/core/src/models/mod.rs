//! Baseline learners behind a uniform fit / predict contract.
//!
//! Every kind handles regression and classification. Classification labels
//! are class indices `0..n_classes` carried as `f64`, and `predict` returns
//! the predicted class index.

mod forest;
mod gbt;
mod knn;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use forest::Forest;
pub use gbt::{BoostVariant, Booster};
pub use knn::KnnModel;
pub use linear::{logistic_objective, LinearModel};
pub use tree::{Node, Tree};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// First-order gradient boosting.
    Gbt,
    /// Second-order regularised gradient boosting.
    GbtReg,
    RandomForest,
    Knn,
    Linear,
    Tree,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Gbt,
        ModelKind::GbtReg,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::Linear,
        ModelKind::Tree,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::GbtReg => "gbt-reg",
            ModelKind::RandomForest => "random-forest",
            ModelKind::Knn => "knn",
            ModelKind::Linear => "linear",
            ModelKind::Tree => "tree",
        }
    }

    pub fn is_tree_based(&self) -> bool {
        matches!(
            self,
            ModelKind::Gbt | ModelKind::GbtReg | ModelKind::RandomForest | ModelKind::Tree
        )
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransform {
    #[default]
    None,
    Log1p,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_samples_leaf: 5,
        }
    }
}

/// Gradient-based one-side sampling: keep the `top_fraction` largest
/// gradients, sample `other_fraction` of the rest and up-weight them by
/// `(1 - top_fraction) / other_fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GossParams {
    pub top_fraction: f64,
    pub other_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub colsample: f64,
    /// L2 penalty on leaf weights (second-order variant only).
    #[serde(default)]
    pub lambda: f64,
    /// Minimum split gain (second-order variant only).
    #[serde(default)]
    pub gamma: f64,
    /// Minimum hessian sum per child (second-order variant only).
    #[serde(default)]
    pub min_child_weight: f64,
    #[serde(default)]
    pub goss: Option<GossParams>,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 5,
            subsample: 1.0,
            colsample: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            goss: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Resample with replacement; when false every tree sees all rows once.
    pub bootstrap: bool,
    /// Bootstrap sample size as a fraction of the training rows.
    pub bootstrap_fraction: f64,
    /// Fraction of features examined at each split.
    pub max_features: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 3,
            bootstrap: true,
            bootstrap_fraction: 1.0,
            max_features: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub ridge: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { ridge: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelParams {
    Gbt(BoostParams),
    GbtReg(BoostParams),
    RandomForest(ForestParams),
    Knn(KnnParams),
    Linear(LinearParams),
    Tree(TreeParams),
}

impl ModelParams {
    pub fn default_for(kind: ModelKind) -> ModelParams {
        match kind {
            ModelKind::Gbt => ModelParams::Gbt(BoostParams::default()),
            ModelKind::GbtReg => ModelParams::GbtReg(BoostParams::default()),
            ModelKind::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            ModelKind::Knn => ModelParams::Knn(KnnParams::default()),
            ModelKind::Linear => ModelParams::Linear(LinearParams::default()),
            ModelKind::Tree => ModelParams::Tree(TreeParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbt(_) => ModelKind::Gbt,
            ModelParams::GbtReg(_) => ModelKind::GbtReg,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Linear(_) => ModelKind::Linear,
            ModelParams::Tree(_) => ModelKind::Tree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::param(format!("{name} must be >= 1")))
            } else {
                Ok(())
            }
        };
        let rate = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        match self {
            ModelParams::Tree(p) => count("min_samples_leaf", p.min_samples_leaf),
            ModelParams::Gbt(p) | ModelParams::GbtReg(p) => {
                count("n_rounds", p.n_rounds)?;
                count("min_samples_leaf", p.min_samples_leaf)?;
                rate("learning_rate", p.learning_rate)?;
                rate("subsample", p.subsample)?;
                rate("colsample", p.colsample)?;
                if !(p.lambda >= 0.0 && p.gamma >= 0.0 && p.min_child_weight >= 0.0) {
                    return Err(Error::param("lambda, gamma and min_child_weight must be >= 0"));
                }
                if let Some(g) = p.goss {
                    rate("goss.top_fraction", g.top_fraction)?;
                    rate("goss.other_fraction", g.other_fraction)?;
                    if g.top_fraction + g.other_fraction > 1.0 {
                        return Err(Error::param("goss fractions must sum to at most 1"));
                    }
                }
                Ok(())
            }
            ModelParams::RandomForest(p) => {
                count("n_trees", p.n_trees)?;
                count("min_samples_leaf", p.min_samples_leaf)?;
                rate("bootstrap_fraction", p.bootstrap_fraction)?;
                rate("max_features", p.max_features)
            }
            ModelParams::Knn(p) => count("k", p.k),
            ModelParams::Linear(p) => {
                if p.ridge >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("ridge must be >= 0"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Fitted {
    Tree(Tree),
    Boosted(Booster),
    Forest(Forest),
    Knn(KnnModel),
    Linear(LinearModel),
}

/// A fitted model. Immutable; `predict` is a pure function of the model and
/// its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: ModelKind,
    pub task: Task,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub target_transform: TargetTransform,
    pub fitted: Fitted,
}

/// Anything that maps one encoded row to a number.
pub trait Predictor: Sync {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for F {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    // First maximum wins, so ties go to the lower class index.
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_labels(y: &[f64], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::param("classification needs at least 2 classes"));
    }
    for &v in y {
        if v < 0.0 || v.fract() != 0.0 || v as usize >= n_classes {
            return Err(Error::param(format!(
                "label {v} is not a class index below {n_classes}"
            )));
        }
    }
    Ok(())
}

/// Fits a model of the kind given by `params`.
pub fn fit(
    params: &ModelParams,
    x: &EncodedMatrix,
    y: &[f64],
    task: Task,
    transform: TargetTransform,
    seed: u64,
) -> Result<TrainedModel> {
    fit_matrix(params, &x.values, &x.feature_names, y, task, transform, seed)
}

pub fn fit_matrix(
    params: &ModelParams,
    x: &Matrix,
    feature_names: &[String],
    y: &[f64],
    task: Task,
    transform: TargetTransform,
    seed: u64,
) -> Result<TrainedModel> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if feature_names.len() != x.cols() {
        return Err(Error::LengthMismatch(feature_names.len(), x.cols()));
    }
    if y.len() < 2 {
        return Err(Error::param("fitting needs at least 2 rows"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("targets must be finite"));
    }
    let transformed: Vec<f64>;
    let y = match (task, transform) {
        (Task::Regression, TargetTransform::Log1p) => {
            if y.iter().any(|&v| v <= -1.0) {
                return Err(Error::param("log1p transform needs targets > -1"));
            }
            transformed = y.iter().map(|v| v.ln_1p()).collect();
            &transformed[..]
        }
        (Task::Classification { n_classes }, _) => {
            check_labels(y, n_classes)?;
            y
        }
        _ => y,
    };
    let fitted = match params {
        ModelParams::Tree(p) => Fitted::Tree(forest::fit_single_tree(x, y, task, p)),
        ModelParams::Gbt(p) => Fitted::Boosted(gbt::fit(x, y, task, p, BoostVariant::FirstOrder, seed)),
        ModelParams::GbtReg(p) => Fitted::Boosted(gbt::fit(x, y, task, p, BoostVariant::SecondOrder, seed)),
        ModelParams::RandomForest(p) => Fitted::Forest(forest::fit(x, y, task, p, seed)),
        ModelParams::Knn(p) => Fitted::Knn(knn::fit(x, y, task, p)?),
        ModelParams::Linear(p) => Fitted::Linear(linear::fit(x, y, task, p)?),
    };
    Ok(TrainedModel {
        version: MODEL_FILE_VERSION,
        kind: params.kind(),
        task,
        params: *params,
        feature_names: feature_names.to_vec(),
        target_transform: if matches!(task, Task::Regression) {
            transform
        } else {
            TargetTransform::None
        },
        fitted,
    })
}

impl TrainedModel {
    /// Raw model output for one row: the regression value in the model's
    /// internal (possibly transformed) scale, or class scores.
    fn raw_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.fitted {
            Fitted::Tree(t) => t.leaf_value(row).to_vec(),
            Fitted::Boosted(b) => b.predict_raw(row),
            Fitted::Forest(f) => f.predict_raw(row, self.task),
            Fitted::Knn(k) => k.predict_raw(row, self.task),
            Fitted::Linear(l) => l.predict_raw(row),
        }
    }

    pub fn predict_one(&self, row: &[f64]) -> f64 {
        let raw = self.raw_row(row);
        match self.task {
            Task::Regression => match self.target_transform {
                TargetTransform::None => raw[0],
                TargetTransform::Log1p => raw[0].exp_m1(),
            },
            Task::Classification { .. } => match &self.fitted {
                Fitted::Boosted(b) => b.class_of(&raw) as f64,
                _ => argmax(&raw) as f64,
            },
        }
    }

    /// Class probabilities (classification) or a single regression value.
    pub fn predict_scores(&self, row: &[f64]) -> Vec<f64> {
        let raw = self.raw_row(row);
        match (&self.fitted, self.task) {
            (Fitted::Boosted(b), Task::Classification { .. }) => b.probabilities(&raw),
            (_, Task::Regression) => vec![self.predict_one(row)],
            _ => raw,
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.feature_names.len() {
            return Err(Error::LengthMismatch(self.feature_names.len(), x.cols()));
        }
        Ok(x.iter_rows().map(|r| self.predict_one(r)).collect())
    }

    /// Predicts every row of `x`; feature names must match the fit-time
    /// snapshot exactly.
    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        if x.feature_names != self.feature_names {
            return Err(Error::FeatureMismatch {
                expected: self.feature_names.clone(),
                actual: x.feature_names.clone(),
            });
        }
        self.predict_matrix(&x.values)
    }

    pub fn booster(&self) -> Option<&Booster> {
        match &self.fitted {
            Fitted::Boosted(b) => Some(b),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<TrainedModel> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FILE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        Ok(serde_json::from_value(v)?)
    }
}

impl Predictor for TrainedModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_one(row)
    }
}
