use super::{DataError, DataSchema, Dataset, Provenance};
use std::io::Read;
use std::path::Path;

/// Load a headed CSV file whose last column is a 0/1 target.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(
        file,
        Provenance::Csv {
            path: path.display().to_string(),
        },
    )
}

/// Parse CSV text from any reader. Line numbers in errors are 1-based and
/// count the header as line 1.
pub fn parse_csv<R: Read>(reader: R, source: Provenance) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(DataError::MissingHeader);
    }
    let names: Vec<String> = header.iter().map(|s| s.trim_start_matches('\u{feff}').to_string()).collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        return Err(DataError::MissingHeader);
    }
    let (target, features) = names.split_last().expect("non-empty header");
    let schema = DataSchema::new(features.to_vec(), target.clone())?;
    let width = names.len();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(DataError::Ragged {
                line,
                expected: width,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(width - 1);
        for (value, column) in record.iter().zip(&names).take(width - 1) {
            let v: f64 = value.parse().map_err(|_| DataError::NonNumeric {
                line,
                column: column.clone(),
                value: value.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    line,
                    column: column.clone(),
                    value: value.to_string(),
                });
            }
            row.push(v);
        }
        let raw = &record[width - 1];
        let label = match raw.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(DataError::NonBinaryTarget {
                    line,
                    value: raw.to_string(),
                })
            }
        };
        rows.push(row);
        labels.push(label);
    }
    Dataset::new(schema, rows, labels, source)
}
