use incident_core::dataset::{encode, synthesize, SynthConfig};
use incident_core::labeling::{threshold_sweep, SweepOptions};
use incident_core::models::{ModelKind, ModelParams, Task};
use incident_core::outliers::{isolation_forest_scores, lof_scores, orm_matrix, IsolationForestParams};
use incident_core::tuning::{run_ieo, CvPlan, HyperSpace, IeoInput, Metric, OrmMode};

fn on_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let run = || {
        let ds = synthesize(&SynthConfig::long_tail(400, 5)).unwrap();
        let x = encode(&ds).unwrap();
        let d = ds.durations().to_vec();
        let orm = orm_matrix(&x.values, &d);
        let iforest = isolation_forest_scores(&orm, &IsolationForestParams::default(), 3).unwrap();
        let lof = lof_scores(&orm, 10).unwrap();
        let input = IeoInput {
            x: &x.values,
            names: &x.feature_names,
            durations: &d,
            targets: &d,
            task: Task::Regression,
        };
        let ieo = run_ieo(
            &input,
            ModelKind::RandomForest,
            &CvPlan::new(4, OrmMode::Intra, 4, 17),
            &HyperSpace::default(),
            Metric::Mape,
        )
        .unwrap();
        let sweep = threshold_sweep(
            &x,
            &d,
            &[ModelParams::default_for(ModelKind::Gbt)],
            &[30.0, 40.0],
            &SweepOptions {
                n_folds: 4,
                seed: 2,
                ..Default::default()
            },
        )
        .unwrap();
        (x, iforest, lof, ieo.predictions, ieo.best_draw, sweep)
    };
    let one = on_threads(1, run);
    let eight = on_threads(8, run);
    assert_eq!(one, eight);
}
