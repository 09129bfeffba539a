use serde::{Deserialize, Serialize};

use super::{argmax, KnnParams, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// k-nearest neighbours on z-scored features (training statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub train: Matrix,
    pub targets: Vec<f64>,
}

pub(crate) fn fit(x: &Matrix, y: &[f64], _task: Task, params: &KnnParams) -> Result<KnnModel> {
    if params.k > y.len() {
        return Err(Error::param(format!(
            "k = {} exceeds {} training rows",
            params.k,
            y.len()
        )));
    }
    let (mean, scale) = x.column_moments();
    let mut train = x.clone();
    for i in 0..train.rows() {
        for (j, v) in train.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / scale[j];
        }
    }
    Ok(KnnModel {
        k: params.k,
        mean,
        scale,
        train,
        targets: y.to_vec(),
    })
}

impl KnnModel {
    /// Training-row indices of the k nearest neighbours of `row`, nearest
    /// first; equal distances resolve to the lower index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q: Vec<f64> = row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut d: Vec<(f64, usize)> = self
            .train
            .iter_rows()
            .enumerate()
            .map(|(i, t)| (t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_raw(&self, row: &[f64], task: Task) -> Vec<f64> {
        let nn = self.neighbours(row);
        match task {
            Task::Regression => vec![nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64],
            Task::Classification { n_classes } => {
                let mut votes = vec![0.0; n_classes];
                for &i in &nn {
                    votes[self.targets[i] as usize] += 1.0;
                }
                votes
            }
        }
    }

    pub fn predict_class(&self, row: &[f64], n_classes: usize) -> usize {
        argmax(&self.predict_raw(row, Task::Classification { n_classes }))
    }
}
