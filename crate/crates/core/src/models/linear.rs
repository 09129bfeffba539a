//! Ridge least squares (normal equations) and softmax / logistic regression
//! by accelerated gradient descent.

use serde::{Deserialize, Serialize};

use super::{LinearParams, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum LinearModel {
    Least {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    /// Weights are `n_classes` rows of `[intercept, w_1..w_M]` on z-scored
    /// features.
    Logistic {
        n_classes: usize,
        mean: Vec<f64>,
        scale: Vec<f64>,
        weights: Vec<f64>,
        iterations: usize,
        gradient_norm: f64,
    },
}

pub(crate) fn fit(x: &Matrix, y: &[f64], task: Task, params: &LinearParams) -> Result<LinearModel> {
    match task {
        Task::Regression => fit_least_squares(x, y, params.ridge),
        Task::Classification { n_classes } => Ok(fit_logistic(x, y, n_classes, params.ridge)),
    }
}

/// Solves `a * z = b` for symmetric positive definite `a` (row-major, d x d).
fn cholesky_solve(a: &[f64], b: &[f64], d: usize, ridge: f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    let max_diag = (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= tol {
                    return Err(Error::Singular { ridge });
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            z[i] -= l[i * d + k] * z[k];
        }
        z[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            z[i] -= l[k * d + i] * z[k];
        }
        z[i] /= l[i * d + i];
    }
    Ok(z)
}

fn fit_least_squares(x: &Matrix, y: &[f64], ridge: f64) -> Result<LinearModel> {
    let n = x.rows() as f64;
    let d = x.cols();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for (row, &t) in x.iter_rows().zip(y) {
        for j in 0..d {
            centred[j] = row[j] - mean[j];
        }
        let yc = t - y_mean;
        for j in 0..d {
            b[j] += centred[j] * yc;
            for k in 0..=j {
                a[j * d + k] += centred[j] * centred[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[k * d + j] = a[j * d + k];
        }
        a[j * d + j] += ridge;
    }
    let coefficients = if d == 0 {
        Vec::new()
    } else {
        cholesky_solve(&a, &b, d, ridge)?
    };
    let intercept = y_mean - coefficients.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel::Least {
        coefficients,
        intercept,
    })
}

fn softmax_row(weights: &[f64], row: &[f64], k: usize, out: &mut [f64]) {
    let m = row.len();
    for c in 0..k {
        let w = &weights[c * (m + 1)..(c + 1) * (m + 1)];
        out[c] = w[0] + w[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    out.iter_mut().for_each(|v| *v /= s);
}

/// Mean multinomial log-loss plus `ridge / 2 * ||w||^2` (intercepts
/// unpenalised) and its gradient. `weights` holds `n_classes` rows of
/// `[intercept, w_1..w_M]`.
pub fn logistic_objective(x: &Matrix, y: &[f64], n_classes: usize, weights: &[f64], ridge: f64) -> (f64, Vec<f64>) {
    let m = x.cols();
    let k = n_classes;
    let n = x.rows() as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut p = vec![0.0; k];
    for (row, &t) in x.iter_rows().zip(y) {
        softmax_row(weights, row, k, &mut p);
        let label = t as usize;
        loss -= p[label].max(1e-300).ln();
        for c in 0..k {
            let r = p[c] - if c == label { 1.0 } else { 0.0 };
            let g = &mut grad[c * (m + 1)..(c + 1) * (m + 1)];
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..k {
        for j in 1..=m {
            let w = weights[c * (m + 1) + j];
            loss += 0.5 * ridge * w * w;
            grad[c * (m + 1) + j] += ridge * w;
        }
    }
    (loss, grad)
}

fn fit_logistic(x: &Matrix, y: &[f64], n_classes: usize, ridge: f64) -> LinearModel {
    let (mean, scale) = x.column_moments();
    let z = x.standardized();
    let m = x.cols();
    let dim = n_classes * (m + 1);
    // Lipschitz bound of the softmax loss gradient on z-scored inputs.
    let lipschitz = 0.5 * (1.0 + m as f64) + ridge;
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; dim];
    let mut prev = w.clone();
    let mut momentum = 1.0f64;
    let (mut loss, mut grad) = logistic_objective(&z, y, n_classes, &w, ridge);
    let mut iterations = 0;
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    while iterations < MAX_ITER && norm(&grad) >= GRAD_TOL {
        iterations += 1;
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let look: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        let (_, g_look) = logistic_objective(&z, y, n_classes, &look, ridge);
        let cand: Vec<f64> = look.iter().zip(&g_look).map(|(a, g)| a - step * g).collect();
        let (cand_loss, cand_grad) = logistic_objective(&z, y, n_classes, &cand, ridge);
        if cand_loss > loss {
            // Restart momentum with a plain gradient step.
            momentum = 1.0;
            prev = w.clone();
            let plain: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let (l, g) = logistic_objective(&z, y, n_classes, &plain, ridge);
            w = plain;
            loss = l;
            grad = g;
        } else {
            momentum = next_momentum;
            prev = std::mem::replace(&mut w, cand);
            loss = cand_loss;
            grad = cand_grad;
        }
    }
    LinearModel::Logistic {
        n_classes,
        mean,
        scale,
        weights: w,
        iterations,
        gradient_norm: norm(&grad),
    }
}

impl LinearModel {
    pub fn predict_raw(&self, row: &[f64]) -> Vec<f64> {
        match self {
            LinearModel::Least {
                coefficients,
                intercept,
            } => vec![intercept + coefficients.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()],
            LinearModel::Logistic {
                n_classes,
                mean,
                scale,
                weights,
                ..
            } => {
                let z: Vec<f64> = row
                    .iter()
                    .zip(mean.iter().zip(scale))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect();
                let mut p = vec![0.0; *n_classes];
                softmax_row(weights, &z, *n_classes, &mut p);
                p
            }
        }
    }
}
