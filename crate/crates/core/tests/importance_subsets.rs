use incident_core::dataset::{encode, synthesize, EncodedMatrix, PlantedEffect, SynthConfig};
use incident_core::importance::{rank_correlation, subset_importance, ImportanceMethod, SubsetImportanceOptions};
use incident_core::labeling::quantile;
use incident_core::models::{ModelKind, ModelParams};

fn with_zero_column(mut x: EncodedMatrix) -> EncodedMatrix {
    x.values = x.values.with_column(&vec![0.0; x.rows()]);
    x.feature_names.push("zero".into());
    x
}

fn options(method: ImportanceMethod, seed: u64) -> SubsetImportanceOptions {
    SubsetImportanceOptions {
        method,
        seed,
        explained: 60,
        n_samples: 120,
        n_repeats: 3,
        ..Default::default()
    }
}

#[test]
fn effect_active_only_in_long_records_ranks_higher_in_b() {
    let mut c = SynthConfig::log_normal(1_500, 21, 40f64.ln(), 0.6);
    c.effects = vec![
        PlantedEffect::Numeric {
            feature: "noise".into(),
            coefficient: 0.6,
            active_above: Some(40.0),
        },
        PlantedEffect::Level {
            feature: "severity".into(),
            level: "high".into(),
            factor: 2.0,
            active_above: None,
        },
    ];
    let ds = synthesize(&c).unwrap();
    let x = with_zero_column(encode(&ds).unwrap());
    let params = ModelParams::default_for(ModelKind::Gbt);
    for method in [ImportanceMethod::Permutation, ImportanceMethod::ShapleySampling] {
        let res = subset_importance(&x, ds.durations(), 40.0, &params, &options(method, 3)).unwrap();
        let (a, b) = (res.a.as_ref().unwrap(), res.b.as_ref().unwrap());
        assert!(
            b.rank_of("noise").unwrap() < a.rank_of("noise").unwrap(),
            "{method:?}: B rank {:?}, A rank {:?}",
            b.rank_of("noise"),
            a.rank_of("noise")
        );
        let m = x.feature_names.len();
        for r in res.reports() {
            assert_eq!(r.rank_of("zero"), Some(m), "{method:?} {:?}", r.subset);
            assert!(r.features.iter().all(|f| f.score.is_finite()));
        }
    }
}

#[test]
fn rankings_agree_when_subsets_share_the_same_mechanism() {
    let mut correlations = Vec::new();
    for seed in 0..5 {
        let ds = synthesize(&SynthConfig::long_tail(1_500, 100 + seed)).unwrap();
        let x = encode(&ds).unwrap();
        let tc = quantile(ds.durations(), 0.5).unwrap();
        let res = subset_importance(
            &x,
            ds.durations(),
            tc,
            &ModelParams::default_for(ModelKind::Gbt),
            &options(ImportanceMethod::Permutation, seed),
        )
        .unwrap();
        correlations.push(rank_correlation(res.a.as_ref().unwrap(), res.b.as_ref().unwrap()).unwrap());
    }
    correlations.sort_by(f64::total_cmp);
    assert!(correlations[2] > 0.5, "{correlations:?}");
}
