//! Incident-log datasets: schema, raw records, encoding, synthesis and
//! duration profiling.

mod encode;
mod load;
mod profile;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode, EncodedMatrix, Encoder, MISSING_LEVEL};
pub use load::{
    load_csv, load_csv_with, DerivedColumn, LoadOptions, LoadReport, Loaded, RowFilter, TimePart, TimestampTarget,
};
pub use profile::{
    ecdf, ecdf_at, fit_all, fit_log_logistic, fit_log_normal, fit_weibull, profile, DistributionFit, DistributionKind,
    LogHistogram, ProfileReport, ZERO_SHIFT_MINUTES,
};
pub use synth::{
    schema as synth_schema, synthesize, CorruptionSpec, DurationModel, PlantedEffect, SynthConfig, INCIDENT_TYPES,
    LEAK_COLUMN, SEVERITIES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
            unit: None,
        }
    }
}

/// Ordered feature columns plus the name of the duration (minutes) column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub target_column: String,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>, target_column: impl Into<String>) -> Result<Self> {
        let schema = FeatureSchema {
            columns,
            target_column: target_column.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("at least one feature column is required".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == self.target_column {
                return Err(Error::Schema(format!(
                    "target column `{}` listed among features",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// One raw feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Missing,
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

/// Raw incident records with their durations in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<Vec<Value>>,
    durations: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<Value>>, durations: Vec<f64>) -> Result<Self> {
        schema.validate()?;
        if rows.len() != durations.len() {
            return Err(Error::LengthMismatch(rows.len(), durations.len()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != schema.columns.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {} columns",
                    r.len(),
                    schema.columns.len()
                )));
            }
            for (v, c) in r.iter().zip(&schema.columns) {
                let ok = match (c.kind, v) {
                    (_, Value::Missing) => true,
                    (ColumnKind::Numeric, Value::Number(x)) => x.is_finite(),
                    (ColumnKind::Boolean, Value::Bool(_)) => true,
                    (ColumnKind::Categorical, Value::Text(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {i}: value {v:?} does not fit column `{}` ({:?})",
                        c.name, c.kind
                    )));
                }
            }
        }
        if let Some((i, d)) = durations.iter().enumerate().find(|(_, d)| !d.is_finite() || **d < 0.0) {
            return Err(Error::param(format!(
                "duration {d} at row {i} is not a finite non-negative number"
            )));
        }
        Ok(Dataset {
            schema,
            rows,
            durations,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            durations: indices.iter().map(|&i| self.durations[i]).collect(),
        }
    }

    /// Records whose duration satisfies `keep`, with their original indices.
    pub fn filter_by_duration(&self, keep: impl Fn(f64) -> bool) -> (Dataset, Vec<usize>) {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.durations[i])).collect();
        (self.subset(&idx), idx)
    }
}
