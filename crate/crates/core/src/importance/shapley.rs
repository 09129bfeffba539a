use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Predictor;
use crate::rng;

/// Up to this many features Shapley values are computed exactly by subset
/// enumeration over the whole background.
pub const EXHAUSTIVE_MAX_FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    pub contributions: Vec<f64>,
    /// Mean model output over the background rows.
    pub base_value: f64,
    pub prediction: f64,
    pub exhaustive: bool,
}

/// `n` rows drawn without replacement (all rows when `n >= rows`), in their
/// original order.
pub fn sample_background(x: &Matrix, n: usize, seed: u64) -> Matrix {
    if n >= x.rows() {
        return x.clone();
    }
    let mut idx: Vec<usize> = sample(&mut rng::stream(seed, &[0xBA]), x.rows(), n).into_vec();
    idx.sort_unstable();
    x.select_rows(&idx)
}

fn exhaustive<P: Predictor + ?Sized>(model: &P, record: &[f64], background: &Matrix) -> Vec<f64> {
    let m = record.len();
    let b = background.rows() as f64;
    // v(S): mean output with features in S taken from the record.
    let value: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            let mut total = 0.0;
            let mut row = vec![0.0; m];
            for z in background.iter_rows() {
                for j in 0..m {
                    row[j] = if mask >> j & 1 == 1 { record[j] } else { z[j] };
                }
                total += model.predict_row(&row);
            }
            total / b
        })
        .collect();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let weights: Vec<f64> = (0..m).map(|s| fact(s) * fact(m - s - 1) / fact(m)).collect();
    (0..m)
        .map(|j| {
            let mut phi = 0.0;
            for mask in 0..1usize << m {
                if mask >> j & 1 == 0 {
                    phi += weights[mask.count_ones() as usize] * (value[mask | 1 << j] - value[mask]);
                }
            }
            phi
        })
        .collect()
}

/// Shapley contributions of each feature to `model(record)`.
///
/// Features are hidden by substituting background values. With more than
/// `EXHAUSTIVE_MAX_FEATURES` features, sample `s` walks a random feature
/// order starting from background row `s mod B`, revealing one feature at a
/// time and crediting each with the change in output.
pub fn shapley_sampling<P: Predictor + ?Sized>(
    model: &P,
    record: &[f64],
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<ShapleyValues> {
    let m = record.len();
    if background.rows() == 0 {
        return Err(Error::param("background sample is empty"));
    }
    if background.cols() != m {
        return Err(Error::LengthMismatch(m, background.cols()));
    }
    if n_samples == 0 {
        return Err(Error::param("n_samples must be >= 1"));
    }
    let base_value = background.iter_rows().map(|z| model.predict_row(z)).sum::<f64>() / background.rows() as f64;
    let prediction = model.predict_row(record);
    if m <= EXHAUSTIVE_MAX_FEATURES {
        return Ok(ShapleyValues {
            contributions: exhaustive(model, record, background),
            base_value,
            prediction,
            exhaustive: true,
        });
    }
    let walks: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng::stream(seed, &[s as u64]));
            let mut cur = background.row(s % background.rows()).to_vec();
            let mut prev = model.predict_row(&cur);
            let mut phi = vec![0.0; m];
            for j in order {
                cur[j] = record[j];
                let now = model.predict_row(&cur);
                phi[j] = now - prev;
                prev = now;
            }
            phi
        })
        .collect();
    let mut contributions = vec![0.0; m];
    for w in &walks {
        for (c, v) in contributions.iter_mut().zip(w) {
            *c += v;
        }
    }
    contributions.iter_mut().for_each(|c| *c /= n_samples as f64);
    Ok(ShapleyValues {
        contributions,
        base_value,
        prediction,
        exhaustive: false,
    })
}

/// Mean absolute Shapley contribution per feature over the rows of
/// `explained`.
pub fn shapley_importance<P: Predictor + ?Sized>(
    model: &P,
    explained: &Matrix,
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let per_row = (0..explained.rows())
        .into_par_iter()
        .map(|i| {
            shapley_sampling(
                model,
                explained.row(i),
                background,
                n_samples,
                rng::derive_seed(seed, &[i as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; explained.cols()];
    for v in &per_row {
        for (o, c) in out.iter_mut().zip(&v.contributions) {
            *o += c.abs();
        }
    }
    let n = explained.rows().max(1) as f64;
    Ok(out.into_iter().map(|v| v / n).collect())
}
