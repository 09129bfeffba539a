//! Gradient boosting with squared-error (regression) or logistic / softmax
//! (classification) loss.
//!
//! First-order rounds fit a least-squares tree to the negative gradient.
//! Second-order rounds grow trees on (gradient, hessian) sums with leaf weight
//! `-G / (H + lambda)` and split gain
//! `0.5 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma`.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, GrowParams, Tree, TreeBuilder};
use super::{argmax, BoostParams, GossParams, Task};
use crate::matrix::Matrix;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoostVariant {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub variant: BoostVariant,
    pub task: Task,
    pub base: Vec<f64>,
    pub learning_rate: f64,
    /// One tree per output per round.
    pub rounds: Vec<Vec<Tree>>,
}

fn n_outputs(task: Task) -> usize {
    match task {
        Task::Regression => 1,
        Task::Classification { n_classes: 2 } => 1,
        Task::Classification { n_classes } => n_classes,
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn base_score(y: &[f64], task: Task) -> Vec<f64> {
    let n = y.len() as f64;
    match task {
        Task::Regression => vec![y.iter().sum::<f64>() / n],
        Task::Classification { n_classes: 2 } => {
            let p = (y.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
            vec![(p / (1.0 - p)).ln()]
        }
        Task::Classification { n_classes } => (0..n_classes)
            .map(|c| {
                let f = y.iter().filter(|&&v| v as usize == c).count() as f64 / n;
                f.max(1e-6).ln()
            })
            .collect(),
    }
}

/// Gradient and hessian of the loss at the current raw scores, per output.
fn gradients(y: &[f64], scores: &[f64], k: usize, task: Task) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut g = vec![0.0; n * k];
    let mut h = vec![0.0; n * k];
    for i in 0..n {
        let s = &scores[i * k..(i + 1) * k];
        match task {
            Task::Regression => {
                g[i] = s[0] - y[i];
                h[i] = 1.0;
            }
            Task::Classification { n_classes: 2 } => {
                let p = sigmoid(s[0]);
                g[i] = p - y[i];
                h[i] = p * (1.0 - p);
            }
            Task::Classification { .. } => {
                let p = softmax(s);
                for c in 0..k {
                    let target = if y[i] as usize == c { 1.0 } else { 0.0 };
                    g[i * k + c] = p[c] - target;
                    h[i * k + c] = p[c] * (1.0 - p[c]);
                }
            }
        }
    }
    (g, h)
}

/// Rows and weights used by one round.
fn round_sample(g: &[f64], k: usize, n: usize, params: &BoostParams, r: &mut StreamRng) -> (Vec<usize>, Vec<f64>) {
    if let Some(GossParams {
        top_fraction,
        other_fraction,
    }) = params.goss
    {
        let mut order: Vec<usize> = (0..n).collect();
        let mag = |i: usize| g[i * k..(i + 1) * k].iter().map(|v| v.abs()).sum::<f64>();
        order.sort_by(|&a, &b| mag(b).total_cmp(&mag(a)).then(a.cmp(&b)));
        let top = ((top_fraction * n as f64).ceil() as usize).min(n);
        let rest = n - top;
        let others = ((other_fraction * n as f64).round() as usize).min(rest);
        let mut rows: Vec<usize> = order[..top].to_vec();
        let mut weights = vec![1.0; top];
        let amplify = (1.0 - top_fraction) / other_fraction;
        let mut picked: Vec<usize> = sample(r, rest, others).into_iter().map(|j| order[top + j]).collect();
        picked.sort_unstable();
        rows.extend(&picked);
        weights.extend(std::iter::repeat_n(amplify, picked.len()));
        (rows, weights)
    } else if params.subsample < 1.0 {
        let size = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let mut rows: Vec<usize> = sample(r, n, size).into_iter().collect();
        rows.sort_unstable();
        (rows, vec![1.0; size])
    } else {
        ((0..n).collect(), vec![1.0; n])
    }
}

pub(crate) fn fit(
    x: &Matrix,
    y: &[f64],
    task: Task,
    params: &BoostParams,
    variant: BoostVariant,
    seed: u64,
) -> Booster {
    let n = y.len();
    let k = n_outputs(task);
    let m = x.cols();
    let base = base_score(y, task);
    let mut scores: Vec<f64> = (0..n).flat_map(|_| base.iter().copied()).collect();
    let criterion = match variant {
        BoostVariant::FirstOrder => Criterion::Mse,
        BoostVariant::SecondOrder => Criterion::Newton {
            lambda: params.lambda,
            gamma: params.gamma,
            min_child_weight: params.min_child_weight,
        },
    };
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: None,
    };
    let mut rounds = Vec::with_capacity(params.n_rounds);
    for round in 0..params.n_rounds {
        let mut r = rng::stream(seed, &[0xB0, round as u64]);
        let (g, h) = gradients(y, &scores, k, task);
        let (rows, weights) = round_sample(&g, k, n, params, &mut r);
        let features: Vec<usize> = if params.colsample < 1.0 {
            let count = ((params.colsample * m as f64).ceil() as usize).clamp(1, m.max(1));
            sample(&mut r, m, count).into_iter().collect()
        } else {
            (0..m).collect()
        };
        let mut trees = Vec::with_capacity(k);
        for c in 0..k {
            let stats: Vec<f64> = rows
                .iter()
                .zip(&weights)
                .flat_map(|(&i, &w)| match variant {
                    BoostVariant::FirstOrder => [w, -w * g[i * k + c]],
                    BoostVariant::SecondOrder => [w * g[i * k + c], w * h[i * k + c]],
                })
                .collect();
            let tree = TreeBuilder::new(x, criterion, grow, &rows, &stats)
                .with_features(features.clone())
                .build(None);
            for i in 0..n {
                scores[i * k + c] += params.learning_rate * tree.leaf_value(x.row(i))[0];
            }
            trees.push(tree);
        }
        rounds.push(trees);
    }
    Booster {
        variant,
        task,
        base,
        learning_rate: params.learning_rate,
        rounds,
    }
}

impl Booster {
    /// Raw scores using only the first `n_rounds` rounds.
    pub fn predict_raw_rounds(&self, row: &[f64], n_rounds: usize) -> Vec<f64> {
        let mut out = self.base.clone();
        for trees in self.rounds.iter().take(n_rounds) {
            for (o, t) in out.iter_mut().zip(trees) {
                *o += self.learning_rate * t.leaf_value(row)[0];
            }
        }
        out
    }

    pub fn predict_raw(&self, row: &[f64]) -> Vec<f64> {
        self.predict_raw_rounds(row, self.rounds.len())
    }

    pub fn probabilities(&self, raw: &[f64]) -> Vec<f64> {
        if raw.len() == 1 {
            let p = sigmoid(raw[0]);
            vec![1.0 - p, p]
        } else {
            softmax(raw)
        }
    }

    pub fn class_of(&self, raw: &[f64]) -> usize {
        if raw.len() == 1 {
            usize::from(raw[0] > 0.0)
        } else {
            argmax(raw)
        }
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.rounds.iter().flatten()
    }
}
