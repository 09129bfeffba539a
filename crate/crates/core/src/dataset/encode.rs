use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset, Value};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Level name used for missing categorical values.
pub const MISSING_LEVEL: &str = "(missing)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnEncoder {
    Numeric { median: f64 },
    Boolean { median: f64 },
    Categorical { levels: Vec<String> },
}

/// Encoding state captured from a training dataset: imputation medians and
/// categorical vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<(String, ColumnEncoder)>,
    feature_names: Vec<String>,
}

/// Numeric design matrix ready for model consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub values: Matrix,
    pub feature_names: Vec<String>,
    /// Position of each encoded row in the source dataset.
    pub row_index: Vec<usize>,
}

impl EncodedMatrix {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            values: self.values.select_rows(indices),
            feature_names: self.feature_names.clone(),
            row_index: indices.iter().map(|&i| self.row_index[i]).collect(),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl Encoder {
    pub fn fit(dataset: &Dataset) -> Result<Encoder> {
        if dataset.is_empty() {
            return Err(Error::param("cannot encode an empty dataset"));
        }
        let mut columns = Vec::new();
        let mut feature_names = Vec::new();
        for (j, spec) in dataset.schema().columns.iter().enumerate() {
            let cells = dataset.rows().iter().map(|r| &r[j]);
            let enc = match spec.kind {
                ColumnKind::Numeric | ColumnKind::Boolean => {
                    let mut observed: Vec<f64> = cells
                        .filter_map(|v| match v {
                            Value::Number(x) => Some(*x),
                            Value::Bool(b) => Some(f64::from(u8::from(*b))),
                            _ => None,
                        })
                        .collect();
                    if observed.is_empty() {
                        return Err(Error::EmptyNumericColumn(spec.name.clone()));
                    }
                    feature_names.push(spec.name.clone());
                    let median = median(&mut observed);
                    if spec.kind == ColumnKind::Numeric {
                        ColumnEncoder::Numeric { median }
                    } else {
                        ColumnEncoder::Boolean { median }
                    }
                }
                ColumnKind::Categorical => {
                    let mut levels: Vec<String> = cells
                        .filter_map(|v| match v {
                            Value::Text(s) => Some(s.clone()),
                            _ => None,
                        })
                        .collect();
                    levels.sort();
                    levels.dedup();
                    if dataset.rows().iter().any(|r| r[j].is_missing()) {
                        levels.push(MISSING_LEVEL.to_string());
                    }
                    feature_names.extend(levels.iter().map(|l| format!("{}={}", spec.name, l)));
                    ColumnEncoder::Categorical { levels }
                }
            };
            columns.push((spec.name.clone(), enc));
        }
        Ok(Encoder { columns, feature_names })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Encodes `dataset` with this encoder's vocabulary. Unseen categorical
    /// levels activate the missing-level indicator when one exists, otherwise
    /// none of the column's indicators.
    pub fn transform(&self, dataset: &Dataset) -> Result<EncodedMatrix> {
        let schema = dataset.schema();
        let positions = self
            .columns
            .iter()
            .map(|(name, _)| schema.index_of(name).ok_or_else(|| Error::MissingColumn(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        let m = self.feature_names.len();
        let mut data = Vec::with_capacity(dataset.len() * m);
        for row in dataset.rows() {
            for ((_, enc), &j) in self.columns.iter().zip(&positions) {
                let v = &row[j];
                match enc {
                    ColumnEncoder::Numeric { median } | ColumnEncoder::Boolean { median } => data.push(match v {
                        Value::Number(x) => *x,
                        Value::Bool(b) => f64::from(u8::from(*b)),
                        _ => *median,
                    }),
                    ColumnEncoder::Categorical { levels } => {
                        let key = match v {
                            Value::Text(s) => s.as_str(),
                            _ => MISSING_LEVEL,
                        };
                        let hit = levels
                            .iter()
                            .position(|l| l == key)
                            .or_else(|| levels.iter().position(|l| l == MISSING_LEVEL));
                        data.extend((0..levels.len()).map(|k| if Some(k) == hit { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        Ok(EncodedMatrix {
            values: Matrix::new(dataset.len(), m, data),
            feature_names: self.feature_names.clone(),
            row_index: (0..dataset.len()).collect(),
        })
    }
}

/// Fits an encoder on `dataset` and encodes it.
pub fn encode(dataset: &Dataset) -> Result<EncodedMatrix> {
    Encoder::fit(dataset)?.transform(dataset)
}
