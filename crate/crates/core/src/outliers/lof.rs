//! Local Outlier Factor over exact Euclidean k-nearest neighbours.

use rayon::prelude::*;

use super::{AnomalyScores, OrmMethod};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Local reachability densities are clamped here when all reachability
/// distances to a point's neighbours are zero (duplicate clusters).
pub const LOF_LRD_CAP: f64 = 1e12;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `k` nearest other rows of `i`, closest first, ties by lower index.
fn neighbours(x: &Matrix, i: usize, k: usize) -> Vec<(usize, f64)> {
    let row = x.row(i);
    let mut d: Vec<(usize, f64)> = (0..x.rows())
        .filter(|&j| j != i)
        .map(|j| (j, dist(row, x.row(j))))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}

pub fn lof_scores(x: &Matrix, k: usize) -> Result<AnomalyScores> {
    let n = x.rows();
    if k < 1 || k >= n {
        return Err(Error::param(format!("LOF needs 1 <= k < n, got k={k}, n={n}")));
    }
    let nn: Vec<Vec<(usize, f64)>> = (0..n).into_par_iter().map(|i| neighbours(x, i, k)).collect();
    let k_dist: Vec<f64> = nn.iter().map(|v| v[k - 1].1).collect();
    let lrd: Vec<(f64, bool)> = nn
        .iter()
        .map(|v| {
            let mean = v.iter().map(|&(j, d)| d.max(k_dist[j])).sum::<f64>() / k as f64;
            if mean <= 0.0 || 1.0 / mean > LOF_LRD_CAP {
                (LOF_LRD_CAP, true)
            } else {
                (1.0 / mean, false)
            }
        })
        .collect();
    let scores = nn
        .iter()
        .enumerate()
        .map(|(i, v)| v.iter().map(|&(j, _)| lrd[j].0).sum::<f64>() / (k as f64 * lrd[i].0))
        .collect();
    Ok(AnomalyScores {
        scores,
        method: OrmMethod::Lof,
        params: serde_json::json!({ "k": k }),
        capped: lrd.iter().filter(|v| v.1).count(),
    })
}
