//! Isolation Forest: average isolation depth over random axis-aligned trees,
//! mapped to `2^(-E[h] / c(psi))`.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnomalyScores, OrmMethod};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, StreamRng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestParams {
    pub n_trees: usize,
    /// Capped at the number of rows.
    pub subsample_size: usize,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        IsolationForestParams {
            n_trees: 100,
            subsample_size: 256,
        }
    }
}

fn harmonic(i: usize) -> f64 {
    if i <= 256 {
        (1..=i).map(|j| 1.0 / j as f64).sum()
    } else {
        let x = i as f64;
        x.ln() + EULER_GAMMA + 0.5 / x - 1.0 / (12.0 * x * x)
    }
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes: `c(n) = 2 H(n-1) - 2 (n-1) / n`, with `c(1) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64
    }
}

enum INode {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

struct ITree {
    nodes: Vec<INode>,
}

impl ITree {
    fn grow(x: &Matrix, rows: Vec<usize>, limit: usize, r: &mut StreamRng) -> ITree {
        let mut t = ITree { nodes: Vec::new() };
        t.build(x, rows, 0, limit, r);
        t
    }

    fn build(&mut self, x: &Matrix, rows: Vec<usize>, depth: usize, limit: usize, r: &mut StreamRng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(INode::External { size: rows.len() });
        if rows.len() <= 1 || depth >= limit {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..x.cols())
            .filter_map(|j| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = x.get(i, j);
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[r.random_range(0..ranges.len())];
        let value = loop {
            let v = lo + r.random::<f64>() * (hi - lo);
            if v > lo && v <= hi {
                break v;
            }
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.get(i, feature) < value);
        let l = self.build(x, left, depth + 1, limit, r);
        let rr = self.build(x, right, depth + 1, limit, r);
        self.nodes[id] = INode::Split {
            feature,
            value,
            left: l,
            right: rr,
        };
        id
    }

    fn path_length(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                INode::External { size } => return depth + average_path_length(size),
                INode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    i = if row[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

pub fn isolation_forest_scores(x: &Matrix, params: &IsolationForestParams, seed: u64) -> Result<AnomalyScores> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::param("isolation forest needs at least 2 rows"));
    }
    if params.n_trees == 0 || params.subsample_size < 2 {
        return Err(Error::param(
            "isolation forest needs n_trees >= 1 and subsample_size >= 2",
        ));
    }
    let psi = params.subsample_size.min(n);
    let limit = (psi as f64).log2().ceil() as usize;
    let per_tree: Vec<Vec<f64>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, &[0x1F, t as u64]);
            let rows: Vec<usize> = if psi == n {
                (0..n).collect()
            } else {
                sample(&mut r, n, psi).into_iter().collect()
            };
            let tree = ITree::grow(x, rows, limit, &mut r);
            x.iter_rows().map(|row| tree.path_length(row)).collect()
        })
        .collect();
    let norm = average_path_length(psi);
    let scores = (0..n)
        .map(|i| {
            let mean = per_tree.iter().map(|h| h[i]).sum::<f64>() / params.n_trees as f64;
            2f64.powf(-mean / norm)
        })
        .collect();
    Ok(AnomalyScores {
        scores,
        method: OrmMethod::IsolationForest,
        params: serde_json::to_value(params)?,
        capped: 0,
    })
}
