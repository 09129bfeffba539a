//! Subcommand runners. Each writes its tables through a [`Run`].

use anyhow::{Context, Result};
use incident_core::dataset::{self, encode, synthesize, Dataset, EncodedMatrix, SynthConfig, Value};
use incident_core::importance::subset_importance;
use incident_core::labeling::{
    binary_labels, ldo_hdo_sweep, multiclass_cv, mutcd_labels, quantile_grid, threshold_sweep, MultiClassThresholds,
    MutcdClass, SweepOptions,
};
use incident_core::models::ModelKind;
use incident_core::models::{ModelParams, Task};
use incident_core::rng::derive_seed;
use incident_core::scenarios::{fusion_cv, quantiled_time_folding, run_scenarios, scenario_table, ScenarioOptions};
use incident_core::table::to_csv_string;
use incident_core::tuning::{iteration_curve, run_ieo, CvPlan, HyperDraw, IeoInput, Metric, OrmMode};
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelChoice};
use crate::manifest::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Profile,
    Synth,
    Sweep,
    Multiclass,
    LdoSweep,
    Scenarios,
    Ieo,
    Fusion,
    Importance,
    Timing,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Synth => "synth",
            Command::Sweep => "sweep",
            Command::Multiclass => "multiclass",
            Command::LdoSweep => "ldo-sweep",
            Command::Scenarios => "scenarios",
            Command::Ieo => "ieo",
            Command::Fusion => "fusion",
            Command::Importance => "importance",
            Command::Timing => "timing",
        }
    }

    /// Key of the command's seed stream under the run seed.
    fn stream_key(&self) -> u64 {
        0xC0_0000 + *self as u64
    }
}

fn params(models: &[ModelChoice]) -> Vec<ModelParams> {
    models.iter().map(ModelChoice::params).collect()
}

pub fn load_dataset(cfg: &ExperimentConfig, run: &mut Run) -> Result<Dataset> {
    if let Some(csv) = &cfg.dataset.csv {
        let loaded = dataset::load_csv_with(&csv.path, &csv.schema, &csv.load_options())
            .with_context(|| format!("loading {}", csv.path.display()))?;
        let r = &loaded.report;
        log::info!(
            "loaded {} of {} rows ({} filtered, {} without target)",
            r.kept,
            r.total_rows,
            r.filtered_out,
            r.dropped_target
        );
        if r.unparseable_values > 0 {
            run.warn(format!(
                "{} unparseable values were treated as missing",
                r.unparseable_values
            ));
        }
        run.write_json("load_report.json", r)?;
        return Ok(loaded.dataset);
    }
    let mut value = cfg.dataset.synth.clone().unwrap_or_default();
    if let Some(obj) = value.as_object_mut() {
        obj.entry("seed").or_insert_with(|| cfg.seed().into());
    }
    let synth: SynthConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| anyhow::anyhow!("invalid config at `dataset.synth.{}`: {}", e.path(), e.inner()))?;
    Ok(synthesize(&synth)?)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Missing => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(x) => x.to_string(),
        Value::Text(s) => s.clone(),
    }
}

fn dataset_csv(ds: &Dataset) -> Result<String> {
    let schema = ds.schema();
    let mut records: Vec<Vec<String>> = Vec::with_capacity(ds.len() + 1);
    let mut header: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    header.push(schema.target_column.clone());
    records.push(header);
    for (row, d) in ds.rows().iter().zip(ds.durations()) {
        let mut rec: Vec<String> = row.iter().map(cell).collect();
        rec.push(d.to_string());
        records.push(rec);
    }
    Ok(to_csv_string(&records)?)
}

pub fn run(command: Command, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let ds = run.stage("load", |run| load_dataset(cfg, run))?;
    let seed = derive_seed(cfg.seed(), &[command.stream_key()]);
    match command {
        Command::Profile => run.stage("profile", |run| profile(&ds, run)),
        Command::Synth => run.stage("synth", |run| run.write("dataset.csv", dataset_csv(&ds)?)),
        _ => {
            let x = run.stage("encode", |_| Ok(encode(&ds)?))?;
            let d = ds.durations();
            run.stage(command.name(), |run| match command {
                Command::Sweep => sweep(cfg, &x, d, seed, run),
                Command::Multiclass => multiclass(cfg, &x, d, seed, run),
                Command::LdoSweep => ldo(cfg, &x, d, seed, run),
                Command::Scenarios => scenarios(cfg, &x, d, seed, run),
                Command::Ieo => ieo(cfg, &x, d, seed, run),
                Command::Fusion => fusion(cfg, &x, d, seed, run),
                Command::Importance => importance(cfg, &x, d, seed, run),
                Command::Timing => timing(cfg, &x, d, seed, run),
                Command::Profile | Command::Synth => unreachable!(),
            })
        }
    }
}

#[derive(Serialize)]
struct EcdfRow {
    duration: f64,
    fraction: f64,
}

fn profile(ds: &Dataset, run: &mut Run) -> Result<()> {
    let report = dataset::profile(ds)?;
    let rows: Vec<EcdfRow> = report
        .ecdf
        .iter()
        .map(|&(duration, fraction)| EcdfRow { duration, fraction })
        .collect();
    run.write("ecdf.csv", to_csv_string(&rows)?)?;
    run.write_json("profile.json", &report)
}

fn sweep(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.sweep;
    let opts = SweepOptions {
        n_folds: b.n_folds,
        seed,
        f1_gate: b.f1_gate,
        min_per_class: b.min_per_class,
    };
    let report = threshold_sweep(x, d, &params(&b.models), &b.tc_values, &opts)?;
    for w in report.warnings() {
        run.warn(w);
    }
    run.write("sweep.csv", report.to_csv()?)?;
    #[derive(Serialize)]
    struct SweepJson<'a> {
        best: Option<&'a incident_core::labeling::SweepRow>,
        report: &'a incident_core::labeling::SweepReport,
    }
    run.write_json(
        "sweep.json",
        &SweepJson {
            best: report.best(),
            report: &report,
        },
    )
}

#[derive(Serialize)]
struct EqualRow {
    model: String,
    t1: f64,
    t2: f64,
    f1_macro: Option<f64>,
}

#[derive(Serialize)]
struct MutcdRow {
    class: MutcdClass,
    count: usize,
    fraction: f64,
}

fn multiclass(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.multiclass;
    let opts = SweepOptions {
        n_folds: b.n_folds,
        seed,
        ..SweepOptions::default()
    };
    let grid = quantile_grid(x, d, &b.model.params(), &b.q1, &b.q2, &opts)?;
    for c in grid.iter().filter(|c| c.f1_macro.is_none()) {
        run.warn(format!("grid cell q1={} q2={} is not evaluable", c.q1, c.q2));
    }
    run.write("multiclass_grid.csv", to_csv_string(&grid)?)?;

    let t = MultiClassThresholds::from_quantiles(d, 1.0 / 3.0, 2.0 / 3.0)?;
    let equal = params(&b.models)
        .iter()
        .map(|p| {
            Ok(EqualRow {
                model: p.kind().name().to_string(),
                t1: t.t1,
                t2: t.t2,
                f1_macro: multiclass_cv(x, d, p, t, &opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write("multiclass_equal.csv", to_csv_string(&equal)?)?;

    let labels = mutcd_labels(d);
    let counts: Vec<MutcdRow> = [MutcdClass::Minor, MutcdClass::Intermediate, MutcdClass::Major]
        .into_iter()
        .map(|class| {
            let count = labels.iter().filter(|&&l| l == class).count();
            MutcdRow {
                class,
                count,
                fraction: count as f64 / labels.len() as f64,
            }
        })
        .collect();
    run.write("mutcd_counts.csv", to_csv_string(&counts)?)
}

fn ldo(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.ldo_sweep;
    let opts = SweepOptions {
        n_folds: b.n_folds,
        seed,
        ..SweepOptions::default()
    };
    let rows = ldo_hdo_sweep(x, d, &params(&b.models), &b.thresholds, b.tc, &opts)?;
    for r in rows.iter().filter(|r| r.flagged) {
        run.warn(format!(
            "duration threshold {} keeps {:.1}% of records",
            r.threshold,
            100.0 * r.remaining_fraction
        ));
    }
    run.write("ldo_sweep.csv", to_csv_string(&rows)?)
}

#[derive(Serialize)]
struct ScenarioDetail<'a> {
    scenario: &'a str,
    model: &'a str,
    mape: Option<f64>,
    mape_excluded: usize,
    rmse: f64,
    train_size: usize,
    test_size: usize,
}

fn scenarios(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.scenarios;
    let opts = ScenarioOptions {
        n_folds: b.n_folds,
        seed,
        transform: b.transform,
    };
    let results = run_scenarios(x, d, b.tc, &b.scenarios, &params(&b.models), &opts)?;
    for r in results.iter().filter(|r| r.mape_excluded > 0) {
        run.warn(format!(
            "{} {}: {} zero-duration records excluded from MAPE",
            r.name, r.model, r.mape_excluded
        ));
    }
    run.write("scenarios.csv", scenario_table(&results)?)?;
    let details: Vec<ScenarioDetail> = results
        .iter()
        .map(|r| ScenarioDetail {
            scenario: r.name.name(),
            model: &r.model,
            mape: r.mape,
            mape_excluded: r.mape_excluded,
            rmse: r.rmse,
            train_size: r.train_size,
            test_size: r.test_indices.len(),
        })
        .collect();
    run.write("scenario_details.csv", to_csv_string(&details)?)?;
    let groups = quantiled_time_folding(
        x,
        d,
        &b.time_folding_model.params(),
        b.time_folding_groups,
        b.transform,
        derive_seed(seed, &[0x7F]),
    )?;
    run.write("time_folding.csv", to_csv_string(&groups)?)
}

fn ieo_targets(metric: Metric, tc: Option<f64>, d: &[f64]) -> Result<(Vec<f64>, Task)> {
    match (metric, tc) {
        (Metric::F1, Some(tc)) => Ok((
            binary_labels(d, tc)?.into_iter().map(|l| l as f64).collect(),
            Task::Classification { n_classes: 2 },
        )),
        (Metric::F1, None) => anyhow::bail!("the f1 metric needs a tc"),
        _ => Ok((d.to_vec(), Task::Regression)),
    }
}

#[derive(Serialize)]
struct IeoSummaryRow {
    model: ModelKind,
    mode: OrmMode,
    metric: Metric,
    best_draw: usize,
    best_metric: f64,
    removed_total: usize,
    validation_metric: Option<f64>,
    report_metric: Option<f64>,
}

#[derive(Serialize)]
struct IeoTraceRow {
    model: ModelKind,
    mode: OrmMode,
    draw: usize,
    metric: Option<f64>,
    removed_total: usize,
    model_params: String,
    orm_params: String,
    error: Option<String>,
}

#[derive(Serialize)]
struct IeoJson<'a> {
    model: ModelKind,
    mode: OrmMode,
    metric: Metric,
    best_metric: f64,
    best_draw: &'a HyperDraw,
    validation: &'a Option<incident_core::tuning::ValidationResult>,
    report: &'a Option<incident_core::tuning::FinalCv>,
}

fn ieo(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.ieo;
    let (targets, task) = ieo_targets(b.metric, b.tc, d)?;
    let input = IeoInput {
        x: &x.values,
        names: &x.feature_names,
        durations: d,
        targets: &targets,
        task,
    };
    let mut summary = Vec::new();
    let mut trace = Vec::new();
    let mut results = Vec::new();
    for &kind in &b.models {
        for &mode in &b.modes {
            let plan = CvPlan {
                n_folds: b.n_folds,
                mode,
                iterations: b.iterations,
                seed: derive_seed(seed, &[kind as u64]),
                target_transform: b.target_transform,
                holdout_fraction: b.holdout_fraction,
                report_folds: b.report_folds,
            };
            log::info!("ieo {kind} {}", mode.name());
            let r = run_ieo(&input, kind, &plan, &b.space, b.metric)?;
            let failed = r.trace.iter().filter(|t| t.metric.is_none()).count();
            if failed > 0 {
                run.warn(format!(
                    "ieo {kind} {}: {failed} of {} draws failed",
                    mode.name(),
                    r.trace.len()
                ));
            }
            summary.push(IeoSummaryRow {
                model: kind,
                mode,
                metric: b.metric,
                best_draw: r.best_draw.draw_index,
                best_metric: r.best_metric,
                removed_total: r.trace[r.best_draw.draw_index].removed_total,
                validation_metric: r.validation.as_ref().and_then(|v| v.metric),
                report_metric: r.report.as_ref().and_then(|f| f.metric),
            });
            for t in &r.trace {
                trace.push(IeoTraceRow {
                    model: kind,
                    mode,
                    draw: t.draw.draw_index,
                    metric: t.metric,
                    removed_total: t.removed_total,
                    model_params: serde_json::to_string(&t.draw.model_params)?,
                    orm_params: serde_json::to_string(&t.draw.orm_params)?,
                    error: t.error.clone(),
                });
            }
            results.push(r);
        }
    }
    run.write("ieo_summary.csv", to_csv_string(&summary)?)?;
    run.write("ieo_trace.csv", to_csv_string(&trace)?)?;
    let json: Vec<IeoJson> = results
        .iter()
        .map(|r| IeoJson {
            model: r.model,
            mode: r.mode,
            metric: r.metric,
            best_metric: r.best_metric,
            best_draw: &r.best_draw,
            validation: &r.validation,
            report: &r.report,
        })
        .collect();
    run.write_json("ieo.json", &json)
}

fn fusion(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.fusion;
    let folds = fusion_cv(x, d, &b.config, b.tc, b.n_folds, seed)?;
    run.write("fusion_folds.csv", to_csv_string(&folds)?)
}

fn importance(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.importance;
    let mut opts = b.options.clone();
    opts.seed = seed;
    let result = subset_importance(x, d, b.tc, &b.model.params(), &opts)?;
    for w in &result.warnings {
        run.warn(w.clone());
    }
    let mut csv = String::new();
    for (i, report) in result.reports().enumerate() {
        let part = report.to_csv()?;
        if i == 0 {
            csv.push_str(&part);
        } else {
            csv.extend(part.split_inclusive('\n').skip(1));
        }
    }
    run.write("importance.csv", csv)?;
    run.write_json("importance.json", &result)
}

#[derive(Serialize)]
struct CurveCsvRow {
    model: ModelKind,
    iterations: usize,
    best_metric: Option<f64>,
}

#[derive(Serialize)]
struct TimingRow {
    model: ModelKind,
    iterations: usize,
    seconds: f64,
}

fn timing(cfg: &ExperimentConfig, x: &EncodedMatrix, d: &[f64], seed: u64, run: &mut Run) -> Result<()> {
    let b = &cfg.timing;
    let input = IeoInput {
        x: &x.values,
        names: &x.feature_names,
        durations: d,
        targets: d,
        task: Task::Regression,
    };
    let mut plan = CvPlan::new(b.n_folds, b.mode, b.counts.iter().copied().max().unwrap_or(1), seed);
    plan.target_transform = b.target_transform;
    let rows = iteration_curve(&input, &b.models, &plan, &b.space, b.metric, &b.counts)?;
    let curve: Vec<CurveCsvRow> = rows
        .iter()
        .map(|r| CurveCsvRow {
            model: r.model,
            iterations: r.iterations,
            best_metric: r.best_metric,
        })
        .collect();
    let times: Vec<TimingRow> = rows
        .iter()
        .map(|r| TimingRow {
            model: r.model,
            iterations: r.iterations,
            seconds: r.seconds,
        })
        .collect();
    run.write("iteration_curve.csv", to_csv_string(&curve)?)?;
    run.write("timing.csv", to_csv_string(&times)?)
}
