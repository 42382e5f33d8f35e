use super::{DataError, Dataset};
use serde::{Deserialize, Serialize};
use std::fmt;

/// The eight per-column statistics of a describe-style summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single row.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Summary of every feature column plus the target column, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub columns: Vec<ColumnSummary>,
}

impl DataSummary {
    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn summarize(d: &Dataset) -> Result<DataSummary, DataError> {
    if d.is_empty() {
        return Err(DataError::Empty);
    }
    let names: Vec<&str> = d.schema.column_names().collect();
    let mut columns = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let values: Vec<f64> = if j < d.n_features() {
            d.rows().iter().map(|r| r[j]).collect()
        } else {
            d.labels().iter().map(|&y| f64::from(y)).collect()
        };
        columns.push(describe(name, values));
    }
    Ok(DataSummary { columns })
}

fn describe(name: &str, mut values: Vec<f64>) -> ColumnSummary {
    let n = values.len();
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    values.sort_by(f64::total_cmp);
    ColumnSummary {
        name: name.to_string(),
        count: n,
        mean,
        std,
        min: values[0],
        q25: quantile_sorted(&values, 0.25),
        q50: quantile_sorted(&values, 0.5),
        q75: quantile_sorted(&values, 0.75),
        max: values[n - 1],
    }
}

/// Linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Describe-style table: one row per statistic, one column per data column,
/// six decimals, right-aligned.
impl fmt::Display for DataSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = ["count", "mean", "std", "min", "25%", "50%", "75%", "max"];
        let cells: Vec<Vec<String>> = self
            .columns
            .iter()
            .map(|c| {
                [c.count as f64, c.mean, c.std, c.min, c.q25, c.q50, c.q75, c.max]
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .zip(&cells)
            .map(|(c, vals)| vals.iter().map(String::len).chain([c.name.len()]).max().unwrap_or(0))
            .collect();
        let index_width = labels.iter().map(|l| l.len()).max().unwrap_or(0);

        write!(f, "{:index_width$}", "")?;
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(f, "  {:>w$}", c.name)?;
        }
        writeln!(f)?;
        for (r, label) in labels.iter().enumerate() {
            write!(f, "{label:<index_width$}")?;
            for (vals, w) in cells.iter().zip(&widths) {
                write!(f, "  {:>w$}", vals[r])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{DataSchema, Provenance};

    fn one_col(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::new(
            DataSchema::new(vec!["x".into()], "y".into()).unwrap(),
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
            Provenance::Generator { id: "t".into() },
        )
        .unwrap()
    }

    #[test]
    fn single_row() {
        let s = summarize(&one_col(&[3.0], &[1])).unwrap();
        let x = s.column("x").unwrap();
        assert_eq!(x.count, 1);
        assert_eq!(x.mean, 3.0);
        assert_eq!(x.std, 0.0);
        assert_eq!((x.min, x.max), (3.0, 3.0));
        assert_eq!(s.column("y").unwrap().mean, 1.0);
    }

    #[test]
    fn two_rows_by_hand() {
        let s = summarize(&one_col(&[0.0, 2.0], &[0, 1])).unwrap();
        let x = s.column("x").unwrap();
        assert_eq!(x.mean, 1.0);
        assert!((x.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(x.q50, 1.0);
        assert_eq!(x.q25, 0.5);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(summarize(&one_col(&[], &[])), Err(DataError::Empty)));
    }

    #[test]
    fn permutation_invariant() {
        let a = summarize(&one_col(&[5.0, -1.0, 2.5, 8.0, 0.0], &[1, 0, 0, 1, 1])).unwrap();
        let b = summarize(&one_col(&[8.0, 0.0, 5.0, 2.5, -1.0], &[1, 1, 1, 0, 0])).unwrap();
        for (ca, cb) in a.columns.iter().zip(&b.columns) {
            assert!((ca.mean - cb.mean).abs() < 1e-12);
            assert!((ca.std - cb.std).abs() < 1e-12);
            assert_eq!((ca.min, ca.q25, ca.q50, ca.q75, ca.max), (cb.min, cb.q25, cb.q50, cb.q75, cb.max));
        }
    }

    #[test]
    fn table_layout() {
        let s = summarize(&one_col(&[0.0, 2.0], &[0, 1])).unwrap();
        let text = s.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[1], "count  2.000000  2.000000");
        assert_eq!(lines[5], "25%    0.500000  0.250000");
        assert!(lines[0].ends_with("         x         y"));
    }
}
