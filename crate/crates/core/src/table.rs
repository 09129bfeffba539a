//! CSV serialisation of report rows.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Renders rows as CSV with a header. Floats use the shortest round-trip
/// representation, so equal values always render identically.
pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let s = to_csv_string(rows)?;
    std::fs::write(path, s).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: Option<f64>,
        name: &'static str,
    }

    #[test]
    fn header_and_missing_values() {
        let s = to_csv_string(&[
            Row {
                a: 0.1,
                b: None,
                name: "x",
            },
            Row {
                a: 2.0,
                b: Some(1.5),
                name: "y",
            },
        ])
        .unwrap();
        assert_eq!(s, "a,b,name\n0.1,,x\n2.0,1.5,y\n");
    }
}
