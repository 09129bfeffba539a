use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, GrowParams, Tree, TreeBuilder};
use super::{argmax, ForestParams, Task, TreeParams};
use crate::matrix::Matrix;
use crate::rng;

fn criterion_for(task: Task) -> Criterion {
    match task {
        Task::Regression => Criterion::Mse,
        Task::Classification { n_classes } => Criterion::Gini { n_classes },
    }
}

fn sample_stats(y: &[f64], rows: &[usize], task: Task) -> Vec<f64> {
    match task {
        Task::Regression => rows.iter().flat_map(|&r| [1.0, y[r]]).collect(),
        Task::Classification { n_classes } => {
            let mut s = vec![0.0; rows.len() * n_classes];
            for (p, &r) in rows.iter().enumerate() {
                s[p * n_classes + y[r] as usize] = 1.0;
            }
            s
        }
    }
}

/// Plain CART on all rows. Regression leaves hold the mean, classification
/// leaves the class distribution.
pub(crate) fn fit_single_tree(x: &Matrix, y: &[f64], task: Task, params: &TreeParams) -> Tree {
    let rows: Vec<usize> = (0..y.len()).collect();
    let stats = sample_stats(y, &rows, task);
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: None,
    };
    TreeBuilder::new(x, criterion_for(task), grow, &rows, &stats).build(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

pub(crate) fn fit(x: &Matrix, y: &[f64], task: Task, params: &ForestParams, seed: u64) -> Forest {
    let n = y.len();
    let m = x.cols();
    let per_split = ((params.max_features * m as f64).ceil() as usize).clamp(1, m.max(1));
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: Some(per_split),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, &[0xF0, t as u64]);
            let rows: Vec<usize> = if params.bootstrap {
                let size = ((params.bootstrap_fraction * n as f64).round() as usize).max(1);
                (0..size).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let stats = sample_stats(y, &rows, task);
            TreeBuilder::new(x, criterion_for(task), grow, &rows, &stats).build(Some(&mut r))
        })
        .collect();
    Forest { trees }
}

impl Forest {
    /// Regression: [mean of tree outputs]. Classification: vote counts per
    /// class, each tree voting for its leaf's majority class.
    pub fn predict_raw(&self, row: &[f64], task: Task) -> Vec<f64> {
        match task {
            Task::Regression => {
                let sum: f64 = self.trees.iter().map(|t| t.leaf_value(row)[0]).sum();
                vec![sum / self.trees.len() as f64]
            }
            Task::Classification { n_classes } => {
                let mut votes = vec![0.0; n_classes];
                for t in &self.trees {
                    votes[argmax(t.leaf_value(row))] += 1.0;
                }
                votes
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_matrix, ModelParams, TargetTransform};

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn step_function_depth_two_is_exact() {
        // Four plateaus need exactly three cuts, reachable at depth 2.
        let xs: Vec<[f64; 1]> = (0..16).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..16).map(|i| [3.0, -1.0, 7.0, 2.0][i / 4]).collect();
        let t = fit_single_tree(
            &Matrix::from_rows(&xs),
            &y,
            Task::Regression,
            &TreeParams {
                max_depth: 2,
                min_samples_leaf: 1,
            },
        );
        let mse: f64 = xs
            .iter()
            .zip(&y)
            .map(|(x, v)| (t.leaf_value(x)[0] - v).powi(2))
            .sum::<f64>()
            / 16.0;
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [1.0, 3.0], [2.0, 4.0], [3.0, 1.0], [4.0, 0.0], [5.0, 2.0]]);
        let y = [1.0, 2.0, 2.5, 7.0, 8.0, 8.5];
        let tp = TreeParams {
            max_depth: 3,
            min_samples_leaf: 1,
        };
        let single = fit_single_tree(&x, &y, Task::Regression, &tp);
        let forest = fit(
            &x,
            &y,
            Task::Regression,
            &ForestParams {
                n_trees: 1,
                max_depth: 3,
                min_samples_leaf: 1,
                bootstrap: false,
                bootstrap_fraction: 1.0,
                max_features: 1.0,
            },
            42,
        );
        assert_eq!(forest.trees[0], single);
    }

    #[test]
    fn binary_vote_tie_goes_to_class_zero() {
        let leaf = |v: Vec<f64>| Tree {
            nodes: vec![super::super::Node::Leaf { value: v }],
        };
        let f = Forest {
            trees: vec![leaf(vec![0.2, 0.8]), leaf(vec![0.9, 0.1])],
        };
        let votes = f.predict_raw(&[0.0], Task::Classification { n_classes: 2 });
        assert_eq!(argmax(&votes), 0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let x = Matrix::from_rows(&(0..200).map(|i| [(i % 17) as f64, (i % 5) as f64]).collect::<Vec<_>>());
        let y: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64).collect();
        let params = ModelParams::RandomForest(ForestParams {
            n_trees: 20,
            ..ForestParams::default()
        });
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fit_matrix(&params, &x, &names(2), &y, Task::Regression, TargetTransform::None, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn more_trees_reduce_prediction_variance() {
        // Noisy target: the spread of predictions across seeds shrinks with
        // more bagged trees.
        let n = 120;
        let xs: Vec<[f64; 2]> = (0..n).map(|i| [(i as f64) / 10.0, ((i * 37) % 11) as f64]).collect();
        let mut r = rng::stream(5, &[1]);
        let y: Vec<f64> = xs.iter().map(|x| x[0] + r.random_range(-3.0..3.0)).collect();
        let x = Matrix::from_rows(&xs);
        let spread = |n_trees| {
            let preds: Vec<f64> = (0..50)
                .map(|s| {
                    let f = fit(
                        &x,
                        &y,
                        Task::Regression,
                        &ForestParams {
                            n_trees,
                            max_depth: 8,
                            min_samples_leaf: 1,
                            ..ForestParams::default()
                        },
                        s,
                    );
                    f.predict_raw(&[6.05, 3.0], Task::Regression)[0]
                })
                .collect();
            let mean = preds.iter().sum::<f64>() / 50.0;
            preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 50.0
        };
        let (v1, v10, v100) = (spread(1), spread(10), spread(100));
        assert!(v1 > v10 && v10 > v100, "{v1} {v10} {v100}");
    }
}
