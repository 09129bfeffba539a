//! Classification and regression evaluation metrics.
//!
//! Zero-denominator conventions: precision and recall are 0 when their
//! denominator is 0, and F1 is 0 when precision + recall is 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    /// One-vs-all counts for `positive`.
    pub fn from_labels(actual: &[usize], predicted: &[usize], positive: usize) -> Self {
        let mut c = ConfusionCounts::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a == positive, p == positive) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn scores(&self) -> ClassificationScores {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassificationScores {
            precision,
            recall,
            accuracy: ratio(self.tp + self.tn, self.total()),
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::param("metrics need at least one pair"));
    }
    Ok(())
}

pub fn classification_metrics(actual: &[usize], predicted: &[usize], positive: usize) -> Result<ClassificationScores> {
    check_lengths(actual.len(), predicted.len())?;
    Ok(ConfusionCounts::from_labels(actual, predicted, positive).scores())
}

/// Unweighted mean of one-vs-all F1 over `classes`.
pub fn f1_macro(actual: &[usize], predicted: &[usize], classes: &[usize]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    if classes.is_empty() {
        return Err(Error::param("f1_macro needs at least one class"));
    }
    let sum: f64 = classes
        .iter()
        .map(|&c| ConfusionCounts::from_labels(actual, predicted, c).scores().f1)
        .sum();
    Ok(sum / classes.len() as f64)
}

/// Mean absolute percentage error, in percent. Every actual value must be > 0.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let mut sum = 0.0;
    for (i, (&a, &f)) in actual.iter().zip(predicted).enumerate() {
        if a <= 0.0 || a.is_nan() {
            return Err(Error::NonPositiveActual { index: i, value: a });
        }
        sum += ((a - f) / a).abs();
    }
    Ok(100.0 * sum / actual.len() as f64)
}

/// MAPE over the pairs with a positive actual value. Returns the metric and
/// the number of excluded pairs; the metric is `None` if nothing remains.
pub fn mape_excluding_zero(actual: &[f64], predicted: &[f64]) -> Result<(Option<f64>, usize)> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    let (a, f): (Vec<f64>, Vec<f64>) = actual
        .iter()
        .zip(predicted)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, f)| (*a, *f))
        .unzip();
    let excluded = actual.len() - a.len();
    if a.is_empty() {
        return Ok((None, excluded));
    }
    Ok((Some(mape(&a, &f)?), excluded))
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let mse = actual
        .iter()
        .zip(predicted)
        .map(|(a, f)| (a - f) * (a - f))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mse.sqrt())
}
