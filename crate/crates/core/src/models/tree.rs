//! CART trees grown by exhaustive scan over sorted feature values.
//!
//! One builder serves three split criteria: weighted squared error, Gini
//! impurity and the second-order regularised gain used by Newton boosting.
//! Each feature's sample positions are sorted once at the root and stably
//! partitioned down the tree.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

/// Binary tree stored as a node arena; node 0 is the root. Rows with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(value.as_slice()),
            _ => None,
        })
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// Stats per sample: [w, w*y].
    Mse,
    /// Stats per sample: one weight slot per class.
    Gini { n_classes: usize },
    /// Stats per sample: [g, h] (already weighted).
    Newton {
        lambda: f64,
        gamma: f64,
        min_child_weight: f64,
    },
}

impl Criterion {
    fn width(&self) -> usize {
        match self {
            Criterion::Mse | Criterion::Newton { .. } => 2,
            Criterion::Gini { n_classes } => *n_classes,
        }
    }

    /// Node "score"; the gain of a split is score(L) + score(R) - score(P).
    fn score(&self, s: &[f64]) -> f64 {
        match self {
            Criterion::Mse => {
                if s[0] > 0.0 {
                    s[1] * s[1] / s[0]
                } else {
                    0.0
                }
            }
            Criterion::Gini { .. } => {
                let w: f64 = s.iter().sum();
                if w > 0.0 {
                    s.iter().map(|c| c * c).sum::<f64>() / w
                } else {
                    0.0
                }
            }
            Criterion::Newton { lambda, .. } => {
                let denom = s[1] + lambda;
                if denom > 0.0 {
                    s[0] * s[0] / denom
                } else {
                    0.0
                }
            }
        }
    }

    fn gain(&self, left: &[f64], right: &[f64], parent: &[f64]) -> f64 {
        let raw = self.score(left) + self.score(right) - self.score(parent);
        match self {
            Criterion::Newton { gamma, .. } => 0.5 * raw - gamma,
            _ => raw,
        }
    }

    fn admissible(&self, left: &[f64], right: &[f64]) -> bool {
        match self {
            Criterion::Newton { min_child_weight, .. } => left[1] >= *min_child_weight && right[1] >= *min_child_weight,
            _ => true,
        }
    }

    fn leaf(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Criterion::Mse => vec![if s[0] > 0.0 { s[1] / s[0] } else { 0.0 }],
            Criterion::Gini { .. } => {
                let w: f64 = s.iter().sum();
                s.iter().map(|c| if w > 0.0 { c / w } else { 0.0 }).collect()
            }
            Criterion::Newton { lambda, .. } => {
                let denom = s[1] + lambda;
                vec![if denom > 0.0 { -s[0] / denom } else { 0.0 }]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all candidate features.
    pub features_per_split: Option<usize>,
}

pub(crate) struct TreeBuilder<'a> {
    x: &'a Matrix,
    criterion: Criterion,
    params: GrowParams,
    /// Row of `x` for each sample position (repeats allowed).
    rows: &'a [usize],
    /// `width` stats per sample position.
    stats: &'a [f64],
    /// Features eligible for splitting, ascending.
    features: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(x: &'a Matrix, criterion: Criterion, params: GrowParams, rows: &'a [usize], stats: &'a [f64]) -> Self {
        assert_eq!(stats.len(), rows.len() * criterion.width());
        TreeBuilder {
            x,
            criterion,
            params,
            rows,
            stats,
            features: (0..x.cols()).collect(),
            nodes: Vec::new(),
        }
    }

    pub fn with_features(mut self, mut features: Vec<usize>) -> Self {
        features.sort_unstable();
        self.features = features;
        self
    }

    pub fn build(mut self, rng: Option<&mut StreamRng>) -> Tree {
        let m = self.rows.len();
        let sorted: Vec<Vec<u32>> = self
            .features
            .iter()
            .map(|&f| {
                let mut p: Vec<u32> = (0..m as u32).collect();
                p.sort_by(|&a, &b| {
                    self.x
                        .get(self.rows[a as usize], f)
                        .total_cmp(&self.x.get(self.rows[b as usize], f))
                        .then(a.cmp(&b))
                });
                p
            })
            .collect();
        let mut rng = rng;
        self.grow(sorted, 0, &mut rng);
        Tree { nodes: self.nodes }
    }

    fn node_stats(&self, positions: &[u32]) -> Vec<f64> {
        let w = self.criterion.width();
        let mut s = vec![0.0; w];
        for &p in positions {
            let p = p as usize;
            for (acc, v) in s.iter_mut().zip(&self.stats[p * w..(p + 1) * w]) {
                *acc += v;
            }
        }
        s
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize, rng: &mut Option<&mut StreamRng>) -> usize {
        let id = self.nodes.len();
        let parent = self.node_stats(&sorted[0]);
        self.nodes.push(Node::Leaf {
            value: self.criterion.leaf(&parent),
        });
        let n = sorted[0].len();
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((slot, threshold)) = self.best_split(&sorted, &parent, rng) else {
            return id;
        };
        let feature = self.features[slot];
        let mut goes_left = vec![false; self.rows.len()];
        for &p in &sorted[slot] {
            goes_left[p as usize] = self.x.get(self.rows[p as usize], feature) < threshold;
        }
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&p| goes_left[p as usize]))
            .unzip();
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Best (slot into `features`, threshold). Ties keep the lower feature,
    /// then the lower threshold.
    fn best_split(
        &self,
        sorted: &[Vec<u32>],
        parent: &[f64],
        rng: &mut Option<&mut StreamRng>,
    ) -> Option<(usize, f64)> {
        let n_features = self.features.len();
        let slots: Vec<usize> = match (self.params.features_per_split, rng.as_deref_mut()) {
            (Some(k), Some(r)) if k < n_features => {
                let mut s: Vec<usize> = sample(r, n_features, k.max(1)).into_iter().collect();
                s.sort_unstable();
                s
            }
            _ => (0..n_features).collect(),
        };
        let w = self.criterion.width();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let base = self.criterion.score(parent);
        // Guards against accepting round-off "gains" on pure nodes.
        let min_gain = match self.criterion {
            Criterion::Newton { .. } => 0.0,
            _ => 1e-12 * base.abs().max(parent.iter().map(|v| v.abs()).sum::<f64>()).max(1e-300),
        };
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left = vec![0.0; w];
        let mut right = vec![0.0; w];
        for slot in slots {
            let feature = self.features[slot];
            let list = &sorted[slot];
            let n = list.len();
            left.iter_mut().for_each(|v| *v = 0.0);
            for (i, &p) in list.iter().enumerate().take(n - 1) {
                let p = p as usize;
                for (acc, v) in left.iter_mut().zip(&self.stats[p * w..(p + 1) * w]) {
                    *acc += v;
                }
                let count_left = i + 1;
                if count_left < min_leaf || n - count_left < min_leaf {
                    continue;
                }
                let a = self.x.get(self.rows[p], feature);
                let b = self.x.get(self.rows[list[i + 1] as usize], feature);
                if a == b {
                    continue;
                }
                for k in 0..w {
                    right[k] = parent[k] - left[k];
                }
                if !self.criterion.admissible(&left, &right) {
                    continue;
                }
                let gain = self.criterion.gain(&left, &right, parent);
                if gain > min_gain && best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some((gain, slot, threshold));
                }
            }
        }
        best.map(|(_, slot, t)| (slot, t))
    }
}
