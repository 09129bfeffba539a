use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset, FeatureSchema, Value};
use crate::error::{Error, Result};

/// Keep only rows whose `column` holds one of `equals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub equals: Vec<String>,
}

/// Duration computed as `end - start` in minutes from two timestamp columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampTarget {
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimePart {
    Hour,
    Weekday,
    Month,
}

/// A numeric schema column computed from a timestamp column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedColumn {
    pub name: String,
    pub from: String,
    pub part: TimePart,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Schema column name -> CSV header name. Unmapped names are used as-is.
    #[serde(default)]
    pub column_map: BTreeMap<String, String>,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
    #[serde(default)]
    pub target_from_timestamps: Option<TimestampTarget>,
    #[serde(default)]
    pub derived: Vec<DerivedColumn>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub total_rows: usize,
    pub filtered_out: usize,
    pub dropped_target: usize,
    pub unparseable_values: usize,
    pub kept: usize,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub report: LoadReport,
}

pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    column_map: &BTreeMap<String, String>,
) -> Result<Loaded> {
    let options = LoadOptions {
        column_map: column_map.clone(),
        ..LoadOptions::default()
    };
    load_csv_with(path, schema, &options)
}

enum Source {
    Column(usize),
    Derived(usize, TimePart),
}

pub fn load_csv_with(path: impl AsRef<Path>, schema: &FeatureSchema, options: &LoadOptions) -> Result<Loaded> {
    schema.validate()?;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mapped = |name: &str| {
        options
            .column_map
            .get(name)
            .map(String::as_str)
            .unwrap_or(name)
            .to_string()
    };

    let mut sources = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        if let Some(d) = options.derived.iter().find(|d| d.name == col.name) {
            if col.kind != ColumnKind::Numeric {
                return Err(Error::Schema(format!("derived column `{}` must be numeric", col.name)));
            }
            sources.push(Source::Derived(find(&mapped(&d.from))?, d.part));
        } else {
            sources.push(Source::Column(find(&mapped(&col.name))?));
        }
    }
    let target = match &options.target_from_timestamps {
        Some(ts) => (find(&mapped(&ts.start))?, Some(find(&mapped(&ts.end))?)),
        None => (find(&mapped(&schema.target_column))?, None),
    };
    let filters = options
        .filters
        .iter()
        .map(|f| Ok((find(&mapped(&f.column))?, &f.equals)))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    let mut durations = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.total_rows += 1;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        if !filters
            .iter()
            .all(|(i, allowed)| allowed.iter().any(|a| a == field(*i)))
        {
            report.filtered_out += 1;
            continue;
        }
        let duration = match target {
            (col, None) => parse_number(field(col)),
            (start, Some(end)) => match (parse_timestamp(field(start)), parse_timestamp(field(end))) {
                (Some(s), Some(e)) => Some((e - s).num_seconds() as f64 / 60.0),
                _ => None,
            },
        };
        let Some(duration) = duration.filter(|d| d.is_finite() && *d >= 0.0) else {
            report.dropped_target += 1;
            continue;
        };
        let mut row = Vec::with_capacity(sources.len());
        for (src, col) in sources.iter().zip(&schema.columns) {
            let v = match *src {
                Source::Column(i) => parse_value(field(i), col.kind),
                Source::Derived(i, part) => {
                    let raw = field(i);
                    if is_missing_token(raw) {
                        Some(Value::Missing)
                    } else {
                        parse_timestamp(raw).map(|t| {
                            Value::Number(match part {
                                TimePart::Hour => t.hour() as f64,
                                TimePart::Weekday => t.weekday().num_days_from_monday() as f64,
                                TimePart::Month => t.month() as f64,
                            })
                        })
                    }
                }
            };
            row.push(v.unwrap_or_else(|| {
                report.unparseable_values += 1;
                Value::Missing
            }));
        }
        rows.push(row);
        durations.push(duration);
    }
    report.kept = rows.len();
    if rows.is_empty() {
        return Err(Error::NoUsableRows {
            dropped: report.dropped_target + report.filtered_out,
        });
    }
    let dataset = Dataset::new(schema.clone(), rows, durations)?;
    Ok(Loaded { dataset, report })
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty()
        || ["na", "nan", "null", "none", "n/a"]
            .iter()
            .any(|t| s.eq_ignore_ascii_case(t))
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `None` means the field was present but could not be parsed.
fn parse_value(s: &str, kind: ColumnKind) -> Option<Value> {
    if is_missing_token(s) {
        return Some(Value::Missing);
    }
    match kind {
        ColumnKind::Numeric => parse_number(s).map(Value::Number),
        ColumnKind::Categorical => Some(Value::Text(s.to_string())),
        ColumnKind::Boolean => match s.to_ascii_lowercase().as_str() {
            "true" | "t" | "yes" | "y" | "1" => Some(Value::Bool(true)),
            "false" | "f" | "no" | "n" | "0" => Some(Value::Bool(false)),
            _ => None,
        },
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
        "%m/%d/%Y %H:%M",
    ];
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}
