//! Duration-to-class mappings and the classification sweeps built on them.

mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sweep::{
    classify_cv, default_tc_values, ldo_hdo_sweep, multiclass_cv, quantile_grid, threshold_sweep, GridCell, LdoRow,
    SweepOptions, SweepReport, SweepRow, DEFAULT_Q1, DEFAULT_Q2, F1_GATE,
};

/// Binary labels: 0 when `y <= tc` (short-term), 1 otherwise.
pub fn binary_labels(durations: &[f64], tc: f64) -> Result<Vec<usize>> {
    if tc.is_nan() || tc <= 0.0 {
        return Err(Error::param(format!("tc must be > 0, got {tc}")));
    }
    Ok(durations.iter().map(|&y| usize::from(y > tc)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiClassThresholds {
    pub t1: f64,
    pub t2: f64,
}

impl MultiClassThresholds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1 < t2) {
            return Err(Error::param(format!("need 0 < t1 < t2, got t1={t1}, t2={t2}")));
        }
        Ok(MultiClassThresholds { t1, t2 })
    }

    /// Thresholds at the `q1` and `q2` empirical quantiles of `durations`.
    pub fn from_quantiles(durations: &[f64], q1: f64, q2: f64) -> Result<Self> {
        MultiClassThresholds::new(quantile(durations, q1)?, quantile(durations, q2)?)
    }
}

/// Three classes: 0 for `y <= t1`, 1 for `t1 < y < t2`, 2 for `y >= t2`.
pub fn multiclass_labels(durations: &[f64], t: MultiClassThresholds) -> Result<Vec<usize>> {
    let t = MultiClassThresholds::new(t.t1, t.t2)?;
    Ok(durations
        .iter()
        .map(|&y| {
            if y <= t.t1 {
                0
            } else if y < t.t2 {
                1
            } else {
                2
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutcdClass {
    Minor,
    Intermediate,
    Major,
}

/// Under 30 minutes minor, 30 to 120 inclusive intermediate, above 120 major.
pub fn mutcd_labels(durations: &[f64]) -> Vec<MutcdClass> {
    durations
        .iter()
        .map(|&y| {
            if y < 30.0 {
                MutcdClass::Minor
            } else if y <= 120.0 {
                MutcdClass::Intermediate
            } else {
                MutcdClass::Major
            }
        })
        .collect()
}

/// Empirical quantile by linear interpolation between order statistics at
/// position `q (n - 1)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::param("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}
