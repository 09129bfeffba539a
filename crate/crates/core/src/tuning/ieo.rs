use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{sample_draw, HyperDraw, HyperSpace};
use super::{fold_indexes, CvPlan, Metric, OrmMode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{self, ModelKind, Task};
use crate::outliers;
use crate::rng;

/// Random-search budgets reported by `iteration_curve`.
pub const ITERATION_COUNTS: [usize; 10] = [25, 50, 75, 100, 125, 150, 175, 200, 225, 250];

/// Borrowed view of the data a search runs on. `targets` are durations for
/// regression and class indices for classification; outlier scoring always
/// uses `durations`.
#[derive(Debug, Clone, Copy)]
pub struct IeoInput<'a> {
    pub x: &'a Matrix,
    pub names: &'a [String],
    pub durations: &'a [f64],
    pub targets: &'a [f64],
    pub task: Task,
}

impl IeoInput<'_> {
    fn check(&self) -> Result<()> {
        let n = self.x.rows();
        for len in [self.durations.len(), self.targets.len()] {
            if len != n {
                return Err(Error::LengthMismatch(n, len));
            }
        }
        Ok(())
    }
}

/// Result of evaluating one draw by cross-validation over a row set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawOutcome {
    pub metric: Option<f64>,
    /// Out-of-fold predictions aligned with the evaluated rows.
    pub predictions: Vec<f64>,
    /// Records removed from each fold's training set.
    pub removed_per_fold: Vec<usize>,
    /// Extra mode: records removed from the part. Intra mode: sum over folds.
    pub removed_total: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub draw: HyperDraw,
    pub metric: Option<f64>,
    pub removed_total: usize,
    pub removed_per_fold: Vec<usize>,
    pub model_seed: u64,
    pub orm_seed: u64,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub indices: Vec<usize>,
    pub predictions: Vec<f64>,
    pub metric: Option<f64>,
    pub training_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalCv {
    pub n_folds: usize,
    pub metric: Option<f64>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IeoResult {
    pub model: ModelKind,
    pub mode: OrmMode,
    pub metric: Metric,
    /// Rows of the train/test part, in order.
    pub part_indices: Vec<usize>,
    /// Out-of-fold predictions of the best draw, aligned with `part_indices`.
    pub predictions: Vec<f64>,
    pub best_draw: HyperDraw,
    pub best_metric: f64,
    pub trace: Vec<DrawRecord>,
    pub validation: Option<ValidationResult>,
    pub report: Option<FinalCv>,
}

fn fit_predict(
    input: &IeoInput,
    draw: &HyperDraw,
    train: &[usize],
    test: &[usize],
    transform: crate::models::TargetTransform,
    seed: u64,
) -> Result<Vec<f64>> {
    let ty: Vec<f64> = train.iter().map(|&i| input.targets[i]).collect();
    let model = models::fit_matrix(
        &draw.model_params,
        &input.x.select_rows(train),
        input.names,
        &ty,
        input.task,
        transform,
        seed,
    )?;
    model.predict_matrix(&input.x.select_rows(test))
}

/// Evaluates one draw over `part` (dataset rows) with sequential folds.
///
/// Extra mode scores and filters `part` once; removed rows are dropped from
/// every training fold but still predicted in their own test fold. Intra mode
/// filters each training fold on its own, removing `percent / (F - 1)` of it
/// so that totals across folds match the extra-mode count. Fold `k` fits with
/// seed `(model_seed, k)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_draw(
    input: &IeoInput,
    part: &[usize],
    n_folds: usize,
    mode: OrmMode,
    draw: &HyperDraw,
    transform: crate::models::TargetTransform,
    model_seed: u64,
    orm_seed: u64,
    metric: Metric,
) -> Result<DrawOutcome> {
    input.check()?;
    let n = part.len();
    let orm = match mode {
        OrmMode::None => None,
        _ => Some(
            draw.orm_params
                .ok_or_else(|| Error::param("ORM mode set but the draw has no ORM parameters"))?,
        ),
    };
    let mut removed = vec![false; n];
    let mut removed_total = 0;
    if let (OrmMode::Extra, Some(o)) = (mode, orm) {
        let positions: Vec<usize> = (0..n).collect();
        let rows_x = input.x.select_rows(part);
        let d: Vec<f64> = part.iter().map(|&i| input.durations[i]).collect();
        let kept = outliers::filter_rows(&rows_x, &d, &positions, &o, o.percent_removed, orm_seed)?;
        removed.iter_mut().for_each(|r| *r = true);
        for p in kept {
            removed[p] = false;
        }
        removed_total = removed.iter().filter(|r| **r).count();
    }

    let mut predictions = vec![f64::NAN; n];
    let mut removed_per_fold = Vec::with_capacity(n_folds);
    let mut failure = None;
    for k in 0..n_folds {
        let (train_pos, test_pos) = fold_indexes(n, n_folds, k)?;
        let before = train_pos.len();
        let train_pos: Vec<usize> = match (mode, orm) {
            (OrmMode::Extra, _) => train_pos.into_iter().filter(|&p| !removed[p]).collect(),
            (OrmMode::Intra, Some(o)) => {
                let fraction = o.percent_removed / (n_folds - 1) as f64;
                let rows: Vec<usize> = train_pos.iter().map(|&p| part[p]).collect();
                let kept = outliers::filter_rows(
                    input.x,
                    input.durations,
                    &rows,
                    &o,
                    fraction,
                    rng::derive_seed(orm_seed, &[k as u64]),
                )?;
                // `filter_rows` keeps order, so map back through a merge.
                let mut out = Vec::with_capacity(kept.len());
                let mut it = kept.iter().peekable();
                for p in train_pos {
                    if it.peek() == Some(&&part[p]) {
                        it.next();
                        out.push(p);
                    }
                }
                out
            }
            _ => train_pos,
        };
        removed_per_fold.push(before - train_pos.len());
        if train_pos.len() < 2 {
            failure = Some(format!("fold {k} has {} training rows after removal", train_pos.len()));
            break;
        }
        let train: Vec<usize> = train_pos.iter().map(|&p| part[p]).collect();
        let test: Vec<usize> = test_pos.iter().map(|&p| part[p]).collect();
        match fit_predict(
            input,
            draw,
            &train,
            &test,
            transform,
            rng::derive_seed(model_seed, &[k as u64]),
        ) {
            Ok(preds) => {
                for (&p, v) in test_pos.iter().zip(preds) {
                    predictions[p] = v;
                }
            }
            Err(e) => {
                failure = Some(format!("fold {k}: {e}"));
                break;
            }
        }
    }
    if mode == OrmMode::Intra {
        removed_total = removed_per_fold.iter().sum();
    }
    let metric_value = match failure {
        Some(_) => None,
        None => {
            let actual: Vec<f64> = part.iter().map(|&i| input.targets[i]).collect();
            metric.score(input.task, &actual, &predictions)?
        }
    };
    Ok(DrawOutcome {
        metric: metric_value,
        predictions,
        removed_per_fold,
        removed_total,
        error: failure,
    })
}

fn part_and_validation(n: usize, holdout: f64) -> (Vec<usize>, Vec<usize>) {
    let n_val = (holdout * n as f64).floor() as usize;
    ((0..n - n_val).collect(), (n - n_val..n).collect())
}

/// Joint random search over model and outlier-removal hyper-parameters.
///
/// The last `holdout_fraction` of rows is kept aside; draws are scored on
/// concatenated out-of-fold predictions over the rest. The best draw (ties to
/// the lower index) is refitted on the filtered part and scored on the
/// held-out rows.
pub fn run_ieo(
    input: &IeoInput,
    kind: ModelKind,
    plan: &CvPlan,
    space: &HyperSpace,
    metric: Metric,
) -> Result<IeoResult> {
    input.check()?;
    plan.validate()?;
    space.validate()?;
    let (part, validation) = part_and_validation(input.x.rows(), plan.holdout_fraction);
    if part.len() < plan.n_folds {
        return Err(Error::param(format!(
            "{} rows in the train/test part cannot form {} folds",
            part.len(),
            plan.n_folds
        )));
    }
    let evaluated: Vec<Result<DrawRecord>> = (0..plan.iterations)
        .into_par_iter()
        .map(|d| {
            let start = Instant::now();
            let draw = sample_draw(space, kind, plan.mode, plan.seed, d);
            let model_seed = rng::derive_seed(plan.seed, &[0x3D, d as u64]);
            let orm_seed = rng::derive_seed(plan.seed, &[0x0E, d as u64]);
            let out = evaluate_draw(
                input,
                &part,
                plan.n_folds,
                plan.mode,
                &draw,
                plan.target_transform,
                model_seed,
                orm_seed,
                metric,
            );
            let (metric_value, removed_total, removed_per_fold, error) = match out {
                Ok(o) => (o.metric, o.removed_total, o.removed_per_fold, o.error),
                Err(e) => (None, 0, Vec::new(), Some(e.to_string())),
            };
            Ok(DrawRecord {
                draw,
                metric: metric_value,
                removed_total,
                removed_per_fold,
                model_seed,
                orm_seed,
                seconds: start.elapsed().as_secs_f64().max(1e-9),
                error,
            })
        })
        .collect();
    let trace = evaluated.into_iter().collect::<Result<Vec<_>>>()?;

    let mut best: Option<usize> = None;
    for (i, r) in trace.iter().enumerate() {
        if best.is_none_or(|b| metric.better(r.metric, trace[b].metric)) {
            best = Some(i);
        }
    }
    let best = best.filter(|&b| trace[b].metric.is_some()).ok_or_else(|| {
        Error::param(format!(
            "every draw failed; first error: {}",
            trace[0].error.clone().unwrap_or_default()
        ))
    })?;
    let rec = &trace[best];
    let outcome = evaluate_draw(
        input,
        &part,
        plan.n_folds,
        plan.mode,
        &rec.draw,
        plan.target_transform,
        rec.model_seed,
        rec.orm_seed,
        metric,
    )?;

    let validation = if validation.is_empty() {
        None
    } else {
        let kept = match (plan.mode, rec.draw.orm_params) {
            (OrmMode::None, _) | (_, None) => part.clone(),
            (_, Some(o)) => {
                outliers::filter_rows(input.x, input.durations, &part, &o, o.percent_removed, rec.orm_seed)?
            }
        };
        let preds = fit_predict(
            input,
            &rec.draw,
            &kept,
            &validation,
            plan.target_transform,
            rng::derive_seed(rec.model_seed, &[u64::MAX]),
        )?;
        let actual: Vec<f64> = validation.iter().map(|&i| input.targets[i]).collect();
        Some(ValidationResult {
            metric: metric.score(input.task, &actual, &preds)?,
            indices: validation,
            predictions: preds,
            training_rows: kept.len(),
        })
    };

    let report = match plan.report_folds {
        None => None,
        Some(f) => {
            let o = evaluate_draw(
                input,
                &part,
                f,
                plan.mode,
                &rec.draw,
                plan.target_transform,
                rec.model_seed,
                rec.orm_seed,
                metric,
            )?;
            Some(FinalCv {
                n_folds: f,
                metric: o.metric,
                predictions: o.predictions,
            })
        }
    };

    Ok(IeoResult {
        model: kind,
        mode: plan.mode,
        metric,
        part_indices: part,
        predictions: outcome.predictions,
        best_draw: rec.draw.clone(),
        best_metric: rec.metric.expect("best draw has a metric"),
        trace,
        validation,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub model: ModelKind,
    pub iterations: usize,
    pub best_metric: Option<f64>,
    /// Summed wall-clock time of the first `iterations` draws.
    pub seconds: f64,
}

/// Best-so-far metric and cumulative draw time at each budget in `counts`,
/// from a single search per model of `max(counts)` draws.
pub fn iteration_curve(
    input: &IeoInput,
    kinds: &[ModelKind],
    plan: &CvPlan,
    space: &HyperSpace,
    metric: Metric,
    counts: &[usize],
) -> Result<Vec<CurveRow>> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::param("iteration counts must contain a positive value"));
    }
    let mut rows = Vec::new();
    for &kind in kinds {
        let mut p = plan.clone();
        p.iterations = max;
        p.report_folds = None;
        let res = run_ieo(input, kind, &p, space, metric)?;
        for &c in counts {
            let mut best = None;
            for r in &res.trace[..c] {
                if metric.better(r.metric, best) {
                    best = r.metric;
                }
            }
            rows.push(CurveRow {
                model: kind,
                iterations: c,
                best_metric: best,
                seconds: res.trace[..c].iter().map(|r| r.seconds).sum(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, TargetTransform, TreeParams};
    use crate::outliers::{OrmMethod, OrmParams};
    use crate::tuning::cross_val_predict;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = rng::stream(seed, &[]);
        let rows: Vec<[f64; 3]> = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
        let y = rows
            .iter()
            .map(|v| 10.0 + 30.0 * v[0] + 5.0 * v[1] + r.random::<f64>())
            .collect();
        (Matrix::from_rows(&rows), y)
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn extra_mode_without_removal_matches_plain_cv() {
        let (x, y) = data(120, 1);
        let names = names();
        let input = IeoInput {
            x: &x,
            names: &names,
            durations: &y,
            targets: &y,
            task: Task::Regression,
        };
        let draw = HyperDraw {
            draw_index: 0,
            model_params: ModelParams::Tree(TreeParams {
                max_depth: 4,
                min_samples_leaf: 3,
            }),
            orm_params: Some(OrmParams::new(OrmMethod::IsolationForest, 0.0)),
        };
        let part: Vec<usize> = (0..100).collect();
        let out = evaluate_draw(
            &input,
            &part,
            5,
            OrmMode::Extra,
            &draw,
            TargetTransform::None,
            42,
            7,
            Metric::Mape,
        )
        .unwrap();
        let plain = cross_val_predict(
            &draw.model_params,
            &x.select_rows(&part),
            &names,
            &y[..100],
            Task::Regression,
            TargetTransform::None,
            5,
            42,
        )
        .unwrap();
        assert_eq!(out.predictions, plain);
        assert_eq!(out.removed_total, 0);
    }

    #[test]
    fn intra_and_extra_remove_comparable_counts() {
        let (x, y) = data(203, 2);
        let names = names();
        let input = IeoInput {
            x: &x,
            names: &names,
            durations: &y,
            targets: &y,
            task: Task::Regression,
        };
        let part: Vec<usize> = (0..203).collect();
        for f in [2, 5, 10] {
            for p in [0.01, 0.03, 0.05] {
                let draw = HyperDraw {
                    draw_index: 0,
                    model_params: ModelParams::Tree(TreeParams::default()),
                    orm_params: Some(OrmParams::new(OrmMethod::Lof, p)),
                };
                let run = |mode| {
                    evaluate_draw(&input, &part, f, mode, &draw, TargetTransform::None, 1, 2, Metric::Rmse).unwrap()
                };
                let intra = run(OrmMode::Intra);
                let extra = run(OrmMode::Extra);
                assert_eq!(extra.removed_total, (p * 203.0 + 1e-9).floor() as usize);
                assert!(intra.removed_total.abs_diff(extra.removed_total) <= f, "F={f} p={p}");
            }
        }
    }

    #[test]
    fn search_is_deterministic_and_selects_minimum() {
        let (x, y) = data(150, 3);
        let names = names();
        let input = IeoInput {
            x: &x,
            names: &names,
            durations: &y,
            targets: &y,
            task: Task::Regression,
        };
        let mut plan = CvPlan::new(5, OrmMode::Intra, 8, 11);
        plan.report_folds = Some(10);
        let space = HyperSpace::default();
        let a = run_ieo(&input, ModelKind::Tree, &plan, &space, Metric::Mape).unwrap();
        let b = run_ieo(&input, ModelKind::Tree, &plan, &space, Metric::Mape).unwrap();
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.best_draw, b.best_draw);
        assert_eq!(a.trace.len(), 8);
        let min = a.trace.iter().filter_map(|r| r.metric).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_metric, min);
        let first = a.trace.iter().position(|r| r.metric == Some(min)).unwrap();
        assert_eq!(a.best_draw.draw_index, first);
        assert_eq!(a.part_indices, (0..120).collect::<Vec<_>>());
        assert!(a.predictions.iter().all(|v| v.is_finite()));
        let v = a.validation.unwrap();
        assert_eq!(v.indices, (120..150).collect::<Vec<_>>());
        assert_eq!(a.report.unwrap().n_folds, 10);
    }

    #[test]
    fn failed_draws_do_not_abort() {
        let (x, y) = data(30, 4);
        let names = names();
        let input = IeoInput {
            x: &x,
            names: &names,
            durations: &y,
            targets: &y,
            task: Task::Regression,
        };
        let mut space = HyperSpace::default();
        space.model.k = [3, 40];
        let plan = CvPlan::new(3, OrmMode::None, 12, 5);
        let res = run_ieo(&input, ModelKind::Knn, &plan, &space, Metric::Rmse).unwrap();
        assert!(res.trace.iter().any(|r| r.metric.is_none() && r.error.is_some()));
        assert!(res.best_metric.is_finite());
    }

    #[test]
    fn curve_is_monotone_with_positive_growing_time() {
        let (x, y) = data(80, 6);
        let names = names();
        let input = IeoInput {
            x: &x,
            names: &names,
            durations: &y,
            targets: &y,
            task: Task::Regression,
        };
        let plan = CvPlan::new(3, OrmMode::None, 1, 9);
        let rows = iteration_curve(
            &input,
            &[ModelKind::Tree],
            &plan,
            &HyperSpace::default(),
            Metric::Rmse,
            &[2, 4, 6, 8],
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        for w in rows.windows(2) {
            assert!(w[1].best_metric.unwrap() <= w[0].best_metric.unwrap());
            assert!(w[1].seconds > w[0].seconds && w[0].seconds > 0.0);
        }
    }
}
