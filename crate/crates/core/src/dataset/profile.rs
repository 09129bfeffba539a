//! Duration profiling: empirical CDF, log-space histogram and maximum
//! likelihood fits of three long-tail families compared by AIC.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Added to zero durations before any log-domain likelihood.
pub const ZERO_SHIFT_MINUTES: f64 = 0.5;
const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    LogNormal,
    LogLogistic,
    Weibull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub distribution: DistributionKind,
    /// log-normal: [mu, sigma]; log-logistic: [scale alpha, shape beta];
    /// Weibull: [shape k, scale lambda].
    pub parameters: Vec<f64>,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    /// Set when the fit failed; the entry is kept and ranked last.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    /// Edges over ln(duration + 1); `counts.len() + 1` entries.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// (duration, fraction of records with duration <= it)
    pub ecdf: Vec<(f64, f64)>,
    pub log_histogram: LogHistogram,
    /// Sorted by AIC ascending; failed fits last.
    pub fitted: Vec<DistributionFit>,
    pub zero_shift: f64,
    pub zero_shifted_count: usize,
}

/// Step points of the empirical CDF over the distinct sorted values.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

/// Fraction of `values` that are <= `x`.
pub fn ecdf_at(values: &[f64], x: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

fn log_histogram(durations: &[f64]) -> LogHistogram {
    let logs: Vec<f64> = durations.iter().map(|d| d.ln_1p()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((logs.len() as f64).sqrt().ceil() as usize).clamp(5, 50);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for l in logs {
        let b = (((l - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    LogHistogram { edges, counts }
}

fn aic(k: usize, ll: f64) -> f64 {
    2.0 * k as f64 - 2.0 * ll
}

fn ok_fit(distribution: DistributionKind, parameters: Vec<f64>, ll: f64) -> DistributionFit {
    let valid = ll.is_finite() && parameters.iter().all(|p| p.is_finite());
    DistributionFit {
        distribution,
        log_likelihood: valid.then_some(ll),
        aic: valid.then(|| aic(parameters.len(), ll)),
        error: (!valid).then(|| "non-finite likelihood".to_string()),
        parameters,
    }
}

fn failed(distribution: DistributionKind, msg: &str) -> DistributionFit {
    DistributionFit {
        distribution,
        parameters: Vec::new(),
        log_likelihood: None,
        aic: None,
        error: Some(msg.to_string()),
    }
}

pub fn fit_log_normal(x: &[f64]) -> DistributionFit {
    let n = x.len() as f64;
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n;
    if var.sqrt() <= 1e-12 * (1.0 + mu.abs()) {
        return failed(DistributionKind::LogNormal, "zero variance in log domain");
    }
    let sigma = var.sqrt();
    let ll = logs
        .iter()
        .map(|l| -l - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - (l - mu).powi(2) / (2.0 * var))
        .sum();
    ok_fit(DistributionKind::LogNormal, vec![mu, sigma], ll)
}

/// Log-likelihood of a logistic(m, s) sample `y` with gradient w.r.t.
/// (m, ln s).
fn logistic_ll(y: &[f64], m: f64, s: f64) -> (f64, [f64; 2]) {
    let mut ll = 0.0;
    let mut gm = 0.0;
    let mut gs = 0.0;
    for &v in y {
        let z = (v - m) / s;
        // ln(1 + e^{-z}) computed stably
        let softplus = if z > 0.0 {
            (-z).exp().ln_1p()
        } else {
            -z + z.exp().ln_1p()
        };
        ll += -z - s.ln() - 2.0 * softplus;
        let t = (0.5 * z).tanh();
        gm += t / s;
        gs += z * t - 1.0;
    }
    (ll, [gm, gs])
}

pub fn fit_log_logistic(x: &[f64]) -> DistributionFit {
    let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let sum_log: f64 = y.iter().sum();
    let n = y.len() as f64;
    let mean = sum_log / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        return failed(DistributionKind::LogLogistic, "zero variance in log domain");
    }
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let mut theta = [sorted[sorted.len() / 2], (3f64.sqrt() * sd / std::f64::consts::PI).ln()];
    let (mut ll, mut grad) = logistic_ll(&y, theta[0], theta[1].exp());
    let mut converged = false;
    for _ in 0..200 {
        // Hessian by central differences of the analytic gradient.
        let mut hess = [[0.0; 2]; 2];
        for (c, row) in hess.iter_mut().enumerate() {
            let h = 1e-5 * (1.0 + theta[c].abs());
            let mut up = theta;
            let mut dn = theta;
            up[c] += h;
            dn[c] -= h;
            let (_, gu) = logistic_ll(&y, up[0], up[1].exp());
            let (_, gd) = logistic_ll(&y, dn[0], dn[1].exp());
            for r in 0..2 {
                row[r] = (gu[r] - gd[r]) / (2.0 * h);
            }
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        // Newton direction on the concave log-likelihood, gradient ascent if
        // the Hessian is not negative definite.
        let mut step = if hess[0][0] < 0.0 && det > 0.0 {
            [
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det,
            ]
        } else {
            [grad[0] / n, grad[1] / n]
        };
        let mut accepted = false;
        for _ in 0..50 {
            let cand = [theta[0] + step[0], theta[1] + step[1]];
            let (cl, cg) = logistic_ll(&y, cand[0], cand[1].exp());
            if cl.is_finite() && cl >= ll - 1e-12 * ll.abs() {
                theta = cand;
                ll = cl;
                grad = cg;
                accepted = true;
                break;
            }
            step = [step[0] * 0.5, step[1] * 0.5];
        }
        if !accepted {
            break;
        }
        if grad[0].abs().max(grad[1].abs()) < 1e-8 * n {
            converged = true;
            break;
        }
    }
    if !converged {
        return failed(DistributionKind::LogLogistic, "Newton iterations did not converge");
    }
    let (m, s) = (theta[0], theta[1].exp());
    // Jacobian of y = ln x.
    ok_fit(DistributionKind::LogLogistic, vec![m.exp(), 1.0 / s], ll - sum_log)
}

pub fn fit_weibull(x: &[f64]) -> DistributionFit {
    let n = x.len() as f64;
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n;
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sd = (logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 1e-12 * (1.0 + mean_log.abs()) {
        return failed(DistributionKind::Weibull, "zero variance in log domain");
    }
    // Profile score in k and its derivative; sums scaled by e^{-k max_log}.
    let score = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * (l - max_log)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let g = 1.0 / k + mean_log - s1 / s0;
        let dg = -1.0 / (k * k) - (s2 * s0 - s1 * s1) / (s0 * s0);
        (g, dg)
    };
    let (mut lo, mut hi) = (1e-3, 1e3);
    if score(lo).0 <= 0.0 || score(hi).0 >= 0.0 {
        return failed(DistributionKind::Weibull, "shape root not bracketed");
    }
    let mut k = (std::f64::consts::PI / (sd * 6f64.sqrt())).clamp(lo * 2.0, hi / 2.0);
    let mut converged = false;
    for _ in 0..200 {
        let (g, dg) = score(k);
        if g > 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        if g.abs() < 1e-12 {
            converged = true;
            break;
        }
        let newton = k - g / dg;
        k = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) < 1e-12 * k {
            converged = true;
            break;
        }
    }
    if !converged {
        return failed(DistributionKind::Weibull, "shape iterations did not converge");
    }
    let mean_pow = logs.iter().map(|l| (k * (l - max_log)).exp()).sum::<f64>() / n;
    let lambda = (mean_pow.ln() / k + max_log).exp();
    let ll = logs
        .iter()
        .map(|l| k.ln() - k * lambda.ln() + (k - 1.0) * l - (k * (l - lambda.ln())).exp())
        .sum();
    ok_fit(DistributionKind::Weibull, vec![k, lambda], ll)
}

/// Fits all three families to strictly positive `x`, sorted by AIC.
pub fn fit_all(x: &[f64]) -> Vec<DistributionFit> {
    let mut fits = vec![fit_log_normal(x), fit_log_logistic(x), fit_weibull(x)];
    fits.sort_by(|a, b| match (a.aic, b.aic) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    fits
}

pub fn profile(dataset: &Dataset) -> Result<ProfileReport> {
    let d = dataset.durations();
    if d.is_empty() {
        return Err(Error::param("cannot profile an empty dataset"));
    }
    let n = d.len();
    let mut sorted = d.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let shifted: Vec<f64> = d
        .iter()
        .map(|&v| if v == 0.0 { ZERO_SHIFT_MINUTES } else { v })
        .collect();
    let fitted = if n >= MIN_FIT_SAMPLES {
        fit_all(&shifted)
    } else {
        [
            DistributionKind::LogNormal,
            DistributionKind::LogLogistic,
            DistributionKind::Weibull,
        ]
        .into_iter()
        .map(|k| failed(k, "fewer than 10 records"))
        .collect()
    };
    Ok(ProfileReport {
        n,
        mean: d.iter().sum::<f64>() / n as f64,
        median,
        max: sorted[n - 1],
        ecdf: ecdf(d),
        log_histogram: log_histogram(d),
        fitted,
        zero_shift: ZERO_SHIFT_MINUTES,
        zero_shifted_count: d.iter().filter(|&&v| v == 0.0).count(),
    })
}
