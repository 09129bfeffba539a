use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::fold_indexes;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::models::{self, ModelParams, TargetTransform, Task};
use crate::rng;

/// Test sets of `n_folds` folds over a seeded shuffle of `0..n`. Each set is
/// sorted; sizes differ by at most one.
pub fn shuffled_folds(n: usize, n_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[0xF01D]));
    (0..n_folds)
        .map(|k| {
            let mut t = order[k * n / n_folds..(k + 1) * n / n_folds].to_vec();
            t.sort_unstable();
            t
        })
        .collect()
}

/// Indices of `0..n` not in the sorted set `test`.
pub fn train_complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - test.len());
    let mut t = test.iter().peekable();
    for i in 0..n {
        if t.peek() == Some(&&i) {
            t.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Out-of-fold predictions over explicit test sets (sorted, disjoint). Fold
/// `k` fits on the complement of its test set with seed `(seed, k)`.
#[allow(clippy::too_many_arguments)]
pub fn cross_val_predict_folds(
    params: &ModelParams,
    x: &Matrix,
    names: &[String],
    y: &[f64],
    task: Task,
    transform: TargetTransform,
    test_sets: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.rows();
    let per_fold: Vec<Result<Vec<f64>>> = test_sets
        .par_iter()
        .enumerate()
        .map(|(k, test)| {
            let train = train_complement(n, test);
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = models::fit_matrix(
                params,
                &x.select_rows(&train),
                names,
                &ty,
                task,
                transform,
                rng::derive_seed(seed, &[k as u64]),
            )?;
            m.predict_matrix(&x.select_rows(test))
        })
        .collect();
    let mut out = vec![f64::NAN; n];
    for (test, preds) in test_sets.iter().zip(per_fold) {
        for (&i, p) in test.iter().zip(preds?) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Plain cross-validation over sequential contiguous folds.
#[allow(clippy::too_many_arguments)]
pub fn cross_val_predict(
    params: &ModelParams,
    x: &Matrix,
    names: &[String],
    y: &[f64],
    task: Task,
    transform: TargetTransform,
    n_folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sets = (0..n_folds)
        .map(|k| fold_indexes(x.rows(), n_folds, k).map(|f| f.1))
        .collect::<Result<Vec<_>>>()?;
    cross_val_predict_folds(params, x, names, y, task, transform, &sets, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffled_folds_partition() {
        let f = shuffled_folds(23, 5, 9);
        let mut all: Vec<usize> = f.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|s| s.len() == 4 || s.len() == 5));
        assert_eq!(f, shuffled_folds(23, 5, 9));
    }

    #[test]
    fn complement() {
        assert_eq!(train_complement(6, &[1, 4]), vec![0, 2, 3, 5]);
    }

    #[test]
    fn constant_target_round_trips_through_log1p() {
        let x = Matrix::from_rows(&(0..20).map(|i| [i as f64]).collect::<Vec<_>>());
        let y = vec![37.0; 20];
        for kind in crate::models::ModelKind::ALL {
            let mut p = ModelParams::default_for(kind);
            if let ModelParams::Knn(k) = &mut p {
                k.k = 3;
            }
            let pred = cross_val_predict(
                &p,
                &x,
                &["a".into()],
                &y,
                Task::Regression,
                TargetTransform::Log1p,
                4,
                1,
            )
            .unwrap();
            assert!(pred.iter().all(|v| (v - 37.0).abs() < 1e-9), "{kind}: {pred:?}");
        }
    }
}
