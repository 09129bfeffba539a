//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use incident_core::dataset::{DerivedColumn, FeatureSchema, LoadOptions, RowFilter, TimestampTarget};
use incident_core::importance::SubsetImportanceOptions;
use incident_core::labeling::{default_tc_values, DEFAULT_Q1, DEFAULT_Q2, F1_GATE};
use incident_core::models::{ModelKind, ModelParams, TargetTransform};
use incident_core::scenarios::{FusionConfig, ScenarioName};
use incident_core::tuning::{HyperSpace, Metric, OrmMode, ITERATION_COUNTS};
use serde::{Deserialize, Serialize};

/// A model given either by kind (default hyper-parameters) or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Kind(ModelKind),
    Params(ModelParams),
}

impl ModelChoice {
    pub fn params(&self) -> ModelParams {
        match self {
            ModelChoice::Kind(k) => ModelParams::default_for(*k),
            ModelChoice::Params(p) => *p,
        }
    }
}

fn kinds(list: &[ModelKind]) -> Vec<ModelChoice> {
    list.iter().copied().map(ModelChoice::Kind).collect()
}

fn classifiers() -> Vec<ModelChoice> {
    kinds(&[
        ModelKind::Gbt,
        ModelKind::GbtReg,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::Linear,
    ])
}

fn regressors() -> Vec<ModelChoice> {
    kinds(&ModelKind::ALL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub schema: FeatureSchema,
    #[serde(default)]
    pub column_map: std::collections::BTreeMap<String, String>,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
    #[serde(default)]
    pub target_from_timestamps: Option<TimestampTarget>,
    #[serde(default)]
    pub derived: Vec<DerivedColumn>,
}

impl CsvSource {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            column_map: self.column_map.clone(),
            filters: self.filters.clone(),
            target_from_timestamps: self.target_from_timestamps.clone(),
            derived: self.derived.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default)]
    pub csv: Option<CsvSource>,
    /// A synthetic generator config; `seed` defaults to the run seed.
    #[serde(default)]
    pub synth: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub models: Vec<ModelChoice>,
    pub tc_values: Vec<f64>,
    pub n_folds: usize,
    pub f1_gate: f64,
    pub min_per_class: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            models: classifiers(),
            tc_values: default_tc_values(),
            n_folds: 10,
            f1_gate: F1_GATE,
            min_per_class: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MulticlassBlock {
    /// Model used for the quantile grid.
    pub model: ModelChoice,
    /// Models compared on the equal-split thresholds.
    pub models: Vec<ModelChoice>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub n_folds: usize,
}

impl Default for MulticlassBlock {
    fn default() -> Self {
        MulticlassBlock {
            model: ModelChoice::Kind(ModelKind::Gbt),
            models: classifiers(),
            q1: DEFAULT_Q1.to_vec(),
            q2: DEFAULT_Q2.to_vec(),
            n_folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdoBlock {
    pub thresholds: Vec<f64>,
    pub tc: f64,
    pub models: Vec<ModelChoice>,
    pub n_folds: usize,
}

impl Default for LdoBlock {
    fn default() -> Self {
        LdoBlock {
            thresholds: (0..=5).map(f64::from).collect(),
            tc: 45.0,
            models: classifiers(),
            n_folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenariosBlock {
    pub tc: f64,
    pub models: Vec<ModelChoice>,
    pub scenarios: Vec<ScenarioName>,
    pub n_folds: usize,
    pub transform: TargetTransform,
    pub time_folding_model: ModelChoice,
    pub time_folding_groups: usize,
}

impl Default for ScenariosBlock {
    fn default() -> Self {
        ScenariosBlock {
            tc: 40.0,
            models: regressors(),
            scenarios: ScenarioName::ALL.to_vec(),
            n_folds: 10,
            transform: TargetTransform::None,
            time_folding_model: ModelChoice::Kind(ModelKind::Gbt),
            time_folding_groups: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IeoBlock {
    pub models: Vec<ModelKind>,
    pub modes: Vec<OrmMode>,
    pub metric: Metric,
    /// Required when the metric is F1: records with duration <= tc are class 0.
    pub tc: Option<f64>,
    pub n_folds: usize,
    pub iterations: usize,
    pub target_transform: TargetTransform,
    pub holdout_fraction: f64,
    pub report_folds: Option<usize>,
    pub space: HyperSpace,
}

impl Default for IeoBlock {
    fn default() -> Self {
        IeoBlock {
            models: vec![ModelKind::Gbt],
            modes: vec![OrmMode::None, OrmMode::Intra, OrmMode::Extra],
            metric: Metric::Mape,
            tc: None,
            n_folds: 10,
            iterations: 250,
            target_transform: TargetTransform::None,
            holdout_fraction: 0.2,
            report_folds: None,
            space: HyperSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionBlock {
    pub tc: f64,
    pub n_folds: usize,
    pub config: FusionConfig,
}

impl Default for FusionBlock {
    fn default() -> Self {
        FusionBlock {
            tc: 40.0,
            n_folds: 10,
            config: FusionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceBlock {
    pub tc: f64,
    pub model: ModelChoice,
    pub options: SubsetImportanceOptions,
}

impl Default for ImportanceBlock {
    fn default() -> Self {
        ImportanceBlock {
            tc: 40.0,
            model: ModelChoice::Kind(ModelKind::Gbt),
            options: SubsetImportanceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingBlock {
    pub models: Vec<ModelKind>,
    pub counts: Vec<usize>,
    pub mode: OrmMode,
    pub metric: Metric,
    pub n_folds: usize,
    pub target_transform: TargetTransform,
    pub space: HyperSpace,
}

impl Default for TimingBlock {
    fn default() -> Self {
        TimingBlock {
            models: vec![
                ModelKind::Gbt,
                ModelKind::RandomForest,
                ModelKind::Knn,
                ModelKind::Linear,
            ],
            counts: ITERATION_COUNTS.to_vec(),
            mode: OrmMode::None,
            metric: Metric::Mape,
            n_folds: 10,
            target_transform: TargetTransform::None,
            space: HyperSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub multiclass: MulticlassBlock,
    #[serde(default)]
    pub ldo_sweep: LdoBlock,
    #[serde(default)]
    pub scenarios: ScenariosBlock,
    #[serde(default)]
    pub ieo: IeoBlock,
    #[serde(default)]
    pub fusion: FusionBlock,
    #[serde(default)]
    pub importance: ImportanceBlock,
    #[serde(default)]
    pub timing: TimingBlock,
}

impl ExperimentConfig {
    /// Parses a config, reporting the field path of any schema error.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("invalid config at `{path}`: {}", e.into_inner())
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(csv) = &mut cfg.dataset.csv {
            if csv.path.is_relative() {
                if let Some(dir) = path.parent() {
                    csv.path = dir.join(&csv.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            bail!("invalid config at `seed`: a seed is required (set it in the config or pass --seed)");
        }
        match (&self.dataset.csv, &self.dataset.synth) {
            (Some(_), Some(_)) => bail!("invalid config at `dataset`: give exactly one of `csv` or `synth`, not both"),
            (None, None) => bail!("invalid config at `dataset`: one of `csv` or `synth` is required"),
            _ => {}
        }
        if self.ieo.metric == Metric::F1 && self.ieo.tc.is_none() {
            bail!("invalid config at `ieo.tc`: required when `ieo.metric` is f1");
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synth_config() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 3, "dataset": {"synth": {"n": 10}}}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.sweep.tc_values.len(), 11);
        assert_eq!(cfg.scenarios.models.len(), 6);
    }

    #[test]
    fn error_names_field_path() {
        let err = ExperimentConfig::from_json(r#"{"seed": 1, "dataset": {"synth": {}}, "sweep": {"n_folds": "x"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sweep.n_folds"), "{err}");
    }

    #[test]
    fn missing_seed_and_double_source_rejected() {
        let cfg = ExperimentConfig::from_json(r#"{"dataset": {"synth": {}}}"#).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("seed"));
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 1, "dataset": {"synth": {}, "csv": {"path": "x.csv", "schema": {"columns": [], "target_column": "d"}}}}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn models_by_kind_or_full_params() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 1, "dataset": {"synth": {}},
                "sweep": {"models": ["knn", {"kind": "knn", "k": 3}]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.sweep.models[0].params(), ModelParams::default_for(ModelKind::Knn));
        assert_eq!(
            cfg.sweep.models[1].params(),
            ModelParams::Knn(incident_core::models::KnnParams { k: 3 })
        );
    }
}
