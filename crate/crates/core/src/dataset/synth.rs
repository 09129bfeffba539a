//! Seeded generator of incident logs with log-normal durations and planted
//! multiplicative feature effects.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnSpec, Dataset, FeatureSchema, Value};
use crate::error::{Error, Result};
use crate::rng;

pub const INCIDENT_TYPES: [&str; 4] = ["accident", "breakdown", "fire", "hazard"];
pub const SEVERITIES: [&str; 3] = ["high", "low", "medium"];
pub const LEAK_COLUMN: &str = "leaked_duration";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DurationModel {
    LogNormal { mu: f64, sigma: f64 },
}

/// A multiplicative effect on duration. With `active_above` set, the effect
/// only applies to records whose base duration exceeds that many minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantedEffect {
    /// duration *= exp(coefficient * value)
    Numeric {
        feature: String,
        coefficient: f64,
        #[serde(default)]
        active_above: Option<f64>,
    },
    /// duration *= factor when the categorical feature equals `level`
    Level {
        feature: String,
        level: String,
        factor: f64,
        #[serde(default)]
        active_above: Option<f64>,
    },
    /// duration *= factor when the boolean feature is true
    Flag {
        feature: String,
        factor: f64,
        #[serde(default)]
        active_above: Option<f64>,
    },
}

/// Replaces the duration of exactly `round(fraction * n)` random records by
/// `duration * factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub fraction: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub duration_model: DurationModel,
    #[serde(default)]
    pub effects: Vec<PlantedEffect>,
    /// Adds a numeric column holding the duration itself.
    #[serde(default)]
    pub leak_duration: bool,
    #[serde(default)]
    pub corruption: Option<CorruptionSpec>,
    /// Fraction of records logged with a 0- or 1-minute duration.
    #[serde(default)]
    pub short_fraction: f64,
    #[serde(default)]
    pub round_to_minute: bool,
}

impl SynthConfig {
    pub fn log_normal(n: usize, seed: u64, mu: f64, sigma: f64) -> Self {
        SynthConfig {
            n,
            seed,
            duration_model: DurationModel::LogNormal { mu, sigma },
            effects: Vec::new(),
            leak_duration: false,
            corruption: None,
            short_fraction: 0.0,
            round_to_minute: false,
        }
    }

    /// Long-tail arterial-road-like profile: median near half an hour,
    /// heavy right tail, effects from incident type, severity, lanes and
    /// peak hour.
    pub fn long_tail(n: usize, seed: u64) -> Self {
        SynthConfig {
            effects: vec![
                PlantedEffect::Level {
                    feature: "incident_type".into(),
                    level: "accident".into(),
                    factor: 1.6,
                    active_above: None,
                },
                PlantedEffect::Level {
                    feature: "incident_type".into(),
                    level: "fire".into(),
                    factor: 2.5,
                    active_above: None,
                },
                PlantedEffect::Level {
                    feature: "severity".into(),
                    level: "high".into(),
                    factor: 2.2,
                    active_above: None,
                },
                PlantedEffect::Numeric {
                    feature: "lanes_blocked".into(),
                    coefficient: 0.3,
                    active_above: None,
                },
                PlantedEffect::Flag {
                    feature: "peak".into(),
                    factor: 0.8,
                    active_above: None,
                },
            ],
            ..SynthConfig::log_normal(n, seed, 20f64.ln(), 0.6)
        }
    }
}

pub fn schema(leak: bool) -> FeatureSchema {
    let mut columns = vec![
        ColumnSpec::new("hour", ColumnKind::Numeric),
        ColumnSpec::new("weekday", ColumnKind::Numeric),
        ColumnSpec::new("lanes_blocked", ColumnKind::Numeric),
        ColumnSpec::new("vehicles", ColumnKind::Numeric),
        ColumnSpec {
            name: "easting".into(),
            kind: ColumnKind::Numeric,
            unit: Some("km".into()),
        },
        ColumnSpec {
            name: "northing".into(),
            kind: ColumnKind::Numeric,
            unit: Some("km".into()),
        },
        ColumnSpec::new("noise", ColumnKind::Numeric),
        ColumnSpec::new("incident_type", ColumnKind::Categorical),
        ColumnSpec::new("severity", ColumnKind::Categorical),
        ColumnSpec::new("peak", ColumnKind::Boolean),
    ];
    if leak {
        columns.push(ColumnSpec::new(LEAK_COLUMN, ColumnKind::Numeric));
    }
    FeatureSchema::new(columns, "duration").expect("static schema is valid")
}

fn effect_multiplier(effect: &PlantedEffect, schema: &FeatureSchema, row: &[Value], base: f64) -> Result<f64> {
    let (feature, active_above) = match effect {
        PlantedEffect::Numeric {
            feature, active_above, ..
        }
        | PlantedEffect::Level {
            feature, active_above, ..
        }
        | PlantedEffect::Flag {
            feature, active_above, ..
        } => (feature, *active_above),
    };
    let j = schema
        .index_of(feature)
        .ok_or_else(|| Error::param(format!("planted effect on unknown feature `{feature}`")))?;
    if active_above.is_some_and(|t| base <= t) {
        return Ok(1.0);
    }
    Ok(match (effect, &row[j]) {
        (PlantedEffect::Numeric { coefficient, .. }, Value::Number(x)) => (coefficient * x).exp(),
        (PlantedEffect::Level { level, factor, .. }, Value::Text(s)) => {
            if s == level {
                *factor
            } else {
                1.0
            }
        }
        (PlantedEffect::Flag { factor, .. }, Value::Bool(b)) => {
            if *b {
                *factor
            } else {
                1.0
            }
        }
        _ => {
            return Err(Error::param(format!(
                "planted effect kind does not match feature `{feature}`"
            )))
        }
    })
}

pub fn synthesize(config: &SynthConfig) -> Result<Dataset> {
    let DurationModel::LogNormal { mu, sigma } = config.duration_model;
    if config.n == 0 {
        return Err(Error::param("synthesize requires n >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return Err(Error::param(
            "log-normal duration model requires finite mu and sigma > 0",
        ));
    }
    if !(0.0..=1.0).contains(&config.short_fraction) {
        return Err(Error::param("short_fraction must lie in [0, 1]"));
    }
    if let Some(c) = config.corruption {
        if !(0.0..=1.0).contains(&c.fraction) || c.factor.is_nan() || c.factor <= 0.0 {
            return Err(Error::param("corruption needs fraction in [0, 1] and factor > 0"));
        }
    }
    let schema = schema(config.leak_duration);
    let mut rng = rng::stream(config.seed, &[0x5EED]);
    let log_noise = Normal::new(mu, sigma).map_err(|e| Error::param(e.to_string()))?;
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rows = Vec::with_capacity(config.n);
    let mut durations = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let hour = rng.random_range(0..24u32);
        let peak = (7..=9).contains(&hour) || (16..=18).contains(&hour);
        let mut row = vec![
            Value::Number(hour as f64),
            Value::Number(rng.random_range(0..7u32) as f64),
            Value::Number(rng.random_range(0..4u32) as f64),
            Value::Number(rng.random_range(1..6u32) as f64),
            Value::Number(rng.random_range(0.0..50.0)),
            Value::Number(rng.random_range(0.0..50.0)),
            Value::Number(gauss.sample(&mut rng)),
            Value::Text(INCIDENT_TYPES[rng.random_range(0..INCIDENT_TYPES.len())].into()),
            Value::Text(SEVERITIES[rng.random_range(0..SEVERITIES.len())].into()),
            Value::Bool(peak),
        ];
        let base = log_noise.sample(&mut rng).exp();
        let mut d = base;
        for effect in &config.effects {
            d *= effect_multiplier(effect, &schema, &row, base)?;
        }
        if config.leak_duration {
            row.push(Value::Missing);
        }
        rows.push(row);
        durations.push(d);
    }

    if let Some(c) = config.corruption {
        let count = (c.fraction * config.n as f64).round() as usize;
        for i in sample(&mut rng, config.n, count).into_iter() {
            durations[i] *= c.factor;
        }
    }
    if config.short_fraction > 0.0 {
        let count = (config.short_fraction * config.n as f64).round() as usize;
        for i in sample(&mut rng, config.n, count).into_iter() {
            durations[i] = f64::from(rng.random_range(0..2u8));
        }
    }
    if config.round_to_minute {
        durations.iter_mut().for_each(|d| *d = d.round());
    }
    if config.leak_duration {
        let j = schema.columns.len() - 1;
        for (row, d) in rows.iter_mut().zip(&durations) {
            row[j] = Value::Number(*d);
        }
    }
    Dataset::new(schema, rows, durations)
}
