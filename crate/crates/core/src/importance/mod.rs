//! Model-agnostic feature importance: column permutation and Monte-Carlo
//! Shapley values, overall and per duration subset.

mod shapley;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{self, ModelParams, TargetTransform, Task, TrainedModel};
use crate::rng;
use crate::scenarios::split_ab;
use crate::table;
use crate::tuning::Metric;

pub use shapley::{sample_background, shapley_importance, shapley_sampling, ShapleyValues, EXHAUSTIVE_MAX_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceMethod {
    Permutation,
    ShapleySampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsetTag {
    #[serde(rename = "all")]
    All,
    A,
    B,
}

impl SubsetTag {
    pub fn name(&self) -> &'static str {
        match self {
            SubsetTag::All => "all",
            SubsetTag::A => "A",
            SubsetTag::B => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub subset: SubsetTag,
    /// In feature order; `rank` 1 is the most important.
    pub features: Vec<FeatureScore>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    feature: &'a str,
    score: f64,
    rank: usize,
    subset: &'a str,
    method: ImportanceMethod,
}

impl ImportanceReport {
    /// Ranks by descending score. Ties go to the feature with the larger
    /// variance in `x`, then to the lower index, so constant columns sink.
    pub fn new(
        method: ImportanceMethod,
        subset: SubsetTag,
        names: &[String],
        scores: &[f64],
        x: &Matrix,
    ) -> Result<Self> {
        if names.len() != scores.len() || x.cols() != scores.len() {
            return Err(Error::LengthMismatch(names.len(), scores.len()));
        }
        if let Some(j) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::param(format!("importance of {} is not finite", names[j])));
        }
        let var: Vec<f64> = (0..x.cols())
            .map(|j| {
                let c = x.column(j);
                let m = c.iter().sum::<f64>() / c.len().max(1) as f64;
                c.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            })
            .collect();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(var[b].total_cmp(&var[a]))
                .then(a.cmp(&b))
        });
        let mut rank = vec![0; scores.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r + 1;
        }
        Ok(ImportanceReport {
            method,
            subset,
            features: (0..scores.len())
                .map(|j| FeatureScore {
                    feature: names[j].clone(),
                    score: scores[j],
                    rank: rank[j],
                })
                .collect(),
        })
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().find(|f| f.feature == feature).map(|f| f.rank)
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.features.iter().find(|f| f.feature == feature).map(|f| f.score)
    }

    /// Rows sorted by rank.
    pub fn to_csv(&self) -> Result<String> {
        let mut rows: Vec<&FeatureScore> = self.features.iter().collect();
        rows.sort_by_key(|f| f.rank);
        let rows: Vec<CsvRow> = rows
            .into_iter()
            .map(|f| CsvRow {
                feature: &f.feature,
                score: f.score,
                rank: f.rank,
                subset: self.subset.name(),
                method: self.method,
            })
            .collect();
        table::to_csv_string(&rows)
    }
}

/// Increase in error (or drop in F1) after shuffling each column, averaged
/// over `n_repeats` seeded shuffles.
pub fn permutation_importance(
    model: &TrainedModel,
    x: &EncodedMatrix,
    y: &[f64],
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if n_repeats == 0 {
        return Err(Error::param("n_repeats must be >= 1"));
    }
    let score = |pred: &[f64]| -> Result<f64> {
        metric
            .score(model.task, y, pred)?
            .ok_or_else(|| Error::param("metric undefined on this sample"))
    };
    let baseline = score(&model.predict(x)?)?;
    let m = x.values.cols();
    let scores = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut total = 0.0;
            for r in 0..n_repeats {
                let mut col = x.values.column(j);
                col.shuffle(&mut rng::stream(seed, &[j as u64, r as u64]));
                let mut xs = x.values.clone();
                for (i, v) in col.into_iter().enumerate() {
                    xs.set(i, j, v);
                }
                let s = score(&model.predict_matrix(&xs)?)?;
                total += if metric.higher_is_better() {
                    baseline - s
                } else {
                    s - baseline
                };
            }
            Ok(total / n_repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    ImportanceReport::new(
        ImportanceMethod::Permutation,
        SubsetTag::All,
        &x.feature_names,
        &scores,
        &x.values,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsetImportanceOptions {
    pub method: ImportanceMethod,
    pub seed: u64,
    pub transform: TargetTransform,
    /// Permutation: shuffles per feature.
    pub n_repeats: usize,
    /// Shapley: background rows, explained rows and sampled permutations.
    pub background: usize,
    pub explained: usize,
    pub n_samples: usize,
    /// Subsets smaller than this are flagged and skipped.
    pub min_records: usize,
}

impl Default for SubsetImportanceOptions {
    fn default() -> Self {
        SubsetImportanceOptions {
            method: ImportanceMethod::ShapleySampling,
            seed: 0,
            transform: TargetTransform::None,
            n_repeats: 5,
            background: 100,
            explained: 100,
            n_samples: 200,
            min_records: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetImportance {
    pub all: Option<ImportanceReport>,
    pub a: Option<ImportanceReport>,
    pub b: Option<ImportanceReport>,
    pub warnings: Vec<String>,
}

impl SubsetImportance {
    pub fn reports(&self) -> impl Iterator<Item = &ImportanceReport> {
        [&self.all, &self.a, &self.b].into_iter().flatten()
    }
}

fn report_for(
    x: &EncodedMatrix,
    durations: &[f64],
    rows: &[usize],
    tag: SubsetTag,
    params: &ModelParams,
    opts: &SubsetImportanceOptions,
) -> Result<ImportanceReport> {
    let sx = x.select_rows(rows);
    let y: Vec<f64> = rows.iter().map(|&i| durations[i]).collect();
    let key = tag as u64;
    let model = models::fit(
        params,
        &sx,
        &y,
        Task::Regression,
        opts.transform,
        rng::derive_seed(opts.seed, &[0x1A, key]),
    )?;
    let mut report = match opts.method {
        ImportanceMethod::Permutation => permutation_importance(
            &model,
            &sx,
            &y,
            Metric::Rmse,
            opts.n_repeats,
            rng::derive_seed(opts.seed, &[0x1B, key]),
        )?,
        ImportanceMethod::ShapleySampling => {
            let background = sample_background(&sx.values, opts.background, rng::derive_seed(opts.seed, &[0x1C, key]));
            let explained = sample_background(&sx.values, opts.explained, rng::derive_seed(opts.seed, &[0x1D, key]));
            let scores = shapley_importance(
                &model,
                &explained,
                &background,
                opts.n_samples,
                rng::derive_seed(opts.seed, &[0x1E, key]),
            )?;
            ImportanceReport::new(
                ImportanceMethod::ShapleySampling,
                tag,
                &sx.feature_names,
                &scores,
                &sx.values,
            )?
        }
    };
    report.subset = tag;
    Ok(report)
}

/// Independent models and reports for all records, subset A (`y <= tc`) and
/// subset B (`y > tc`).
pub fn subset_importance(
    x: &EncodedMatrix,
    durations: &[f64],
    tc: f64,
    params: &ModelParams,
    opts: &SubsetImportanceOptions,
) -> Result<SubsetImportance> {
    if durations.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), durations.len()));
    }
    let split = split_ab(durations, tc)?;
    let all: Vec<usize> = (0..durations.len()).collect();
    let mut warnings = Vec::new();
    let mut run = |rows: &[usize], tag: SubsetTag| -> Result<Option<ImportanceReport>> {
        if rows.len() < opts.min_records {
            warnings.push(format!(
                "subset {} has {} records (< {}); skipped",
                tag.name(),
                rows.len(),
                opts.min_records
            ));
            return Ok(None);
        }
        report_for(x, durations, rows, tag, params, opts).map(Some)
    };
    let all_r = run(&all, SubsetTag::All)?;
    let a = run(&split.a, SubsetTag::A)?;
    let b = run(&split.b, SubsetTag::B)?;
    Ok(SubsetImportance {
        all: all_r,
        a,
        b,
        warnings,
    })
}

/// Spearman rank correlation between two reports over their shared features.
pub fn rank_correlation(a: &ImportanceReport, b: &ImportanceReport) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .features
        .iter()
        .filter_map(|f| b.rank_of(&f.feature).map(|r| (f.rank as f64, r as f64)))
        .collect();
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let d2: f64 = pairs.iter().map(|(x, y)| (x - y) * (x - y)).sum();
    Some(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}
