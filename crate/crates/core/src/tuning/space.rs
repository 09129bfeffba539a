use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OrmMode;
use crate::error::{Error, Result};
use crate::models::{
    BoostParams, ForestParams, GossParams, KnnParams, LinearParams, ModelKind, ModelParams, TreeParams,
};
use crate::outliers::{OrmMethod, OrmParams};
use crate::rng::{self, StreamRng};

/// Inclusive ranges for every model hyper-parameter. Learning rate and ridge
/// are sampled log-uniformly, everything else uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpace {
    pub max_depth: [usize; 2],
    pub min_samples_leaf: [usize; 2],
    pub n_rounds: [usize; 2],
    pub learning_rate: [f64; 2],
    pub subsample: [f64; 2],
    pub colsample: [f64; 2],
    pub lambda: [f64; 2],
    pub gamma: [f64; 2],
    pub min_child_weight: [f64; 2],
    pub goss: Option<GossParams>,
    pub n_trees: [usize; 2],
    pub forest_max_depth: [usize; 2],
    pub max_features: [f64; 2],
    pub k: [usize; 2],
    pub ridge: [f64; 2],
}

impl Default for ModelSpace {
    fn default() -> Self {
        ModelSpace {
            max_depth: [2, 8],
            min_samples_leaf: [1, 20],
            n_rounds: [50, 200],
            learning_rate: [0.01, 0.3],
            subsample: [0.5, 1.0],
            colsample: [0.5, 1.0],
            lambda: [0.0, 10.0],
            gamma: [0.0, 1.0],
            min_child_weight: [0.0, 10.0],
            goss: None,
            n_trees: [50, 200],
            forest_max_depth: [4, 16],
            max_features: [0.2, 1.0],
            k: [3, 50],
            ridge: [1e-6, 10.0],
        }
    }
}

/// Outlier-removal search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrmSpace {
    pub methods: Vec<OrmMethod>,
    /// Fractions of the train/test part removed; each at most 0.05.
    pub percent_grid: Vec<f64>,
    pub n_trees: [usize; 2],
    pub subsample_size: [usize; 2],
    pub k: [usize; 2],
}

impl Default for OrmSpace {
    fn default() -> Self {
        OrmSpace {
            methods: vec![OrmMethod::IsolationForest, OrmMethod::Lof],
            percent_grid: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            n_trees: [50, 200],
            subsample_size: [64, 256],
            k: [5, 50],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperSpace {
    pub model: ModelSpace,
    pub orm: OrmSpace,
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let usize_ranges = [
            ("max_depth", m.max_depth),
            ("min_samples_leaf", m.min_samples_leaf),
            ("n_rounds", m.n_rounds),
            ("n_trees", m.n_trees),
            ("forest_max_depth", m.forest_max_depth),
            ("k", m.k),
            ("orm.n_trees", self.orm.n_trees),
            ("orm.subsample_size", self.orm.subsample_size),
            ("orm.k", self.orm.k),
        ];
        for (name, [lo, hi]) in usize_ranges {
            if lo > hi {
                return Err(Error::param(format!("range {name} is empty: [{lo}, {hi}]")));
            }
        }
        let f64_ranges = [
            ("learning_rate", m.learning_rate),
            ("subsample", m.subsample),
            ("colsample", m.colsample),
            ("lambda", m.lambda),
            ("gamma", m.gamma),
            ("min_child_weight", m.min_child_weight),
            ("max_features", m.max_features),
            ("ridge", m.ridge),
        ];
        for (name, [lo, hi]) in f64_ranges {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::param(format!("range {name} is empty: [{lo}, {hi}]")));
            }
        }
        if m.learning_rate[0] <= 0.0 || m.ridge[0] <= 0.0 {
            return Err(Error::param(
                "learning_rate and ridge ranges must be positive (log-uniform)",
            ));
        }
        if self.orm.methods.is_empty() || self.orm.percent_grid.is_empty() {
            return Err(Error::param("ORM space needs at least one method and one percent"));
        }
        if let Some(p) = self.orm.percent_grid.iter().find(|p| !(0.0..=0.05).contains(*p)) {
            return Err(Error::param(format!("percent {p} outside [0, 0.05]")));
        }
        Ok(())
    }
}

/// One point of the joint model x outlier-removal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperDraw {
    pub draw_index: usize,
    pub model_params: ModelParams,
    pub orm_params: Option<OrmParams>,
}

fn int(r: &mut StreamRng, [lo, hi]: [usize; 2]) -> usize {
    r.random_range(lo..=hi)
}

fn uniform(r: &mut StreamRng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        r.random_range(lo..hi)
    }
}

fn log_uniform(r: &mut StreamRng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        r.random_range(lo.ln()..hi.ln()).exp().clamp(lo, hi)
    }
}

fn sample_model(space: &ModelSpace, kind: ModelKind, r: &mut StreamRng) -> ModelParams {
    let boost = |r: &mut StreamRng, second_order: bool| {
        let mut p = BoostParams {
            n_rounds: int(r, space.n_rounds),
            learning_rate: log_uniform(r, space.learning_rate),
            max_depth: int(r, space.max_depth),
            min_samples_leaf: int(r, space.min_samples_leaf),
            subsample: uniform(r, space.subsample),
            colsample: uniform(r, space.colsample),
            goss: space.goss,
            ..BoostParams::default()
        };
        if second_order {
            p.lambda = uniform(r, space.lambda);
            p.gamma = uniform(r, space.gamma);
            p.min_child_weight = uniform(r, space.min_child_weight);
        }
        p
    };
    match kind {
        ModelKind::Gbt => ModelParams::Gbt(boost(r, false)),
        ModelKind::GbtReg => ModelParams::GbtReg(boost(r, true)),
        ModelKind::RandomForest => ModelParams::RandomForest(ForestParams {
            n_trees: int(r, space.n_trees),
            max_depth: int(r, space.forest_max_depth),
            min_samples_leaf: int(r, space.min_samples_leaf),
            max_features: uniform(r, space.max_features),
            ..ForestParams::default()
        }),
        ModelKind::Knn => ModelParams::Knn(KnnParams { k: int(r, space.k) }),
        ModelKind::Linear => ModelParams::Linear(LinearParams {
            ridge: log_uniform(r, space.ridge),
        }),
        ModelKind::Tree => ModelParams::Tree(TreeParams {
            max_depth: int(r, space.max_depth),
            min_samples_leaf: int(r, space.min_samples_leaf),
        }),
    }
}

fn sample_orm(space: &OrmSpace, r: &mut StreamRng) -> OrmParams {
    let method = space.methods[r.random_range(0..space.methods.len())];
    let percent_removed = space.percent_grid[r.random_range(0..space.percent_grid.len())];
    OrmParams {
        method,
        percent_removed,
        n_trees: int(r, space.n_trees),
        subsample_size: int(r, space.subsample_size),
        k: int(r, space.k),
    }
}

/// Deterministic function of `(seed, draw_index)`. Model and ORM dimensions
/// use separate streams, so the model part of a draw does not depend on the
/// ORM mode.
pub fn sample_draw(space: &HyperSpace, kind: ModelKind, mode: OrmMode, seed: u64, draw_index: usize) -> HyperDraw {
    let model_params = sample_model(&space.model, kind, &mut rng::stream(seed, &[0xD4A3, draw_index as u64]));
    let orm_params = match mode {
        OrmMode::None => None,
        _ => Some(sample_orm(
            &space.orm,
            &mut rng::stream(seed, &[0x04A3, draw_index as u64]),
        )),
    };
    HyperDraw {
        draw_index,
        model_params,
        orm_params,
    }
}
