//! Data ingestion, sequential splitting, summaries and online scaling.
//!
//! A [`Dataset`] is an ordered stream of feature rows with a binary target.
//! Row order is the stream order: nothing in this module shuffles rows
//! implicitly. [`display_sample`] is the only operation that subsamples, and
//! it keeps the sampled rows in their original order.

mod csv_source;
mod registry;
mod report;
mod scaler;
mod sea;
mod summary;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

pub use csv_source::{load_csv, parse_csv};
pub use registry::{bananas, DataRegistry, DataSource, DatasetInfo, BANANAS_ID, DEFAULT_SEA_ID};
pub use report::{data_report, DataReport, DisplaySample, DISPLAY_SEED};
pub use scaler::{OnlineScaler, ScalerKind};
pub use sea::{generate_sea, SeaConfig, SeaSegment, SEA_THRESHOLDS};
pub use summary::{summarize, ColumnSummary, DataSummary};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing header row")]
    MissingHeader,
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column '{column}': '{value}' is not a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column '{column}': '{value}' is not a finite number")]
    NonFinite {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: target '{value}' is not a binary label (0 or 1)")]
    NonBinaryTarget { line: u64, value: String },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    Empty,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown dataset '{0}'")]
    UnknownDataset(String),
}

/// Column layout of a dataset. The target is always the final column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSchema {
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl DataSchema {
    pub fn new(feature_names: Vec<String>, target_name: String) -> Result<Self, DataError> {
        if feature_names.is_empty() {
            return Err(DataError::InvalidHeader(
                "at least one feature column is required before the target".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for name in feature_names.iter().chain(std::iter::once(&target_name)) {
            if name.is_empty() {
                return Err(DataError::InvalidHeader("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DataError::InvalidHeader(format!("duplicate column name '{name}'")));
            }
        }
        Ok(Self {
            feature_names,
            target_name,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Feature names followed by the target name.
    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.feature_names
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.target_name.as_str()))
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Csv { path: String },
    Generator { id: String },
    Subset { of: Box<Provenance> },
}

/// An ordered binary-classification stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: DataSchema,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
    pub source: Provenance,
}

impl Dataset {
    pub fn new(
        schema: DataSchema,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        source: Provenance,
    ) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Config(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = schema.n_features();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(DataError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(DataError::Config(format!("label {bad} is not binary")));
        }
        Ok(Self {
            schema,
            rows,
            labels,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.rows
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
    }

    /// Rows `start..end` as a new dataset, keeping order.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows[start..end].to_vec(),
            labels: self.labels[start..end].to_vec(),
            source: self.source.clone(),
        }
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source: Provenance::Subset {
                of: Box::new(self.source.clone()),
            },
        }
    }
}

/// Instance cap and test fraction for a sequential train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub n_total: Option<usize>,
    pub test_size: f64,
}

impl SplitSpec {
    pub fn new(n_total: Option<usize>, test_size: f64) -> Self {
        Self { n_total, test_size }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.test_size > 0.0 && self.test_size < 1.0) {
            return Err(DataError::Config(format!(
                "test_size must lie strictly between 0 and 1, got {}",
                self.test_size
            )));
        }
        if self.n_total == Some(0) {
            return Err(DataError::Config("n_total must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of training rows for an effective length `n`.
    pub fn train_len(&self, n: usize) -> usize {
        // Guard against 5300 * 0.7 landing a hair below 3710.
        let raw = n as f64 * (1.0 - self.test_size);
        (raw + 1e-9 * raw.max(1.0)).floor() as usize
    }
}

/// Truncate to `n_total` rows, then split the head into train and the tail
/// into test. No shuffling.
pub fn split_train_test(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    s.validate()?;
    let n = match s.n_total {
        Some(cap) if cap > d.len() => {
            return Err(DataError::Config(format!(
                "n_total = {cap} exceeds the dataset length {}",
                d.len()
            )))
        }
        Some(cap) => cap,
        None => d.len(),
    };
    let n_train = s.train_len(n);
    if n_train == 0 || n_train >= n {
        return Err(DataError::Config(format!(
            "split of {n} rows with test_size = {} leaves an empty partition",
            s.test_size
        )));
    }
    Ok((d.slice(0, n_train), d.slice(n_train, n)))
}

/// Default row cap for display subsamples.
pub const DISPLAY_CAP: usize = 1000;

/// Uniform random subset of at most `cap` rows, in stream order.
pub fn display_sample(d: &Dataset, cap: usize, seed: u64) -> Dataset {
    let cap = cap.max(1);
    if d.len() <= cap {
        return d.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, d.len(), cap).into_vec();
    idx.sort_unstable();
    d.select(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(n: usize) -> Dataset {
        let schema = DataSchema::new(vec!["x".into()], "y".into()).unwrap();
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(
            schema,
            rows,
            labels,
            Provenance::Generator { id: "toy".into() },
        )
        .unwrap()
    }

    #[test]
    fn half_split_is_sequential() {
        let d = toy(10);
        let (train, test) = split_train_test(&d, &SplitSpec::new(None, 0.5)).unwrap();
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);
        assert_eq!(train.features(0), &[0.0]);
        assert_eq!(test.features(0), &[5.0]);
    }

    #[test]
    fn bananas_sized_split_counts() {
        let d = toy(5300);
        let (train, test) = split_train_test(&d, &SplitSpec::new(None, 0.3)).unwrap();
        assert_eq!((train.len(), test.len()), (3710, 1590));
    }

    #[test]
    fn n_total_truncates_head() {
        let d = toy(5300);
        let (train, test) = split_train_test(&d, &SplitSpec::new(Some(100), 0.3)).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
        assert_eq!(test.features(29), &[99.0]);
    }

    #[test]
    fn invalid_splits_are_rejected() {
        let d = toy(10);
        assert!(split_train_test(&d, &SplitSpec::new(None, 0.0)).is_err());
        assert!(split_train_test(&d, &SplitSpec::new(None, 1.0)).is_err());
        assert!(split_train_test(&d, &SplitSpec::new(Some(11), 0.5)).is_err());
        // One row cannot be split into two non-empty parts.
        assert!(split_train_test(&d, &SplitSpec::new(Some(1), 0.5)).is_err());
    }

    #[test]
    fn display_sample_small_is_identity() {
        let d = toy(800);
        assert_eq!(display_sample(&d, DISPLAY_CAP, 3).rows(), d.rows());
    }

    #[test]
    fn display_sample_caps_and_is_deterministic() {
        let d = toy(5300);
        let a = display_sample(&d, DISPLAY_CAP, 11);
        let b = display_sample(&d, DISPLAY_CAP, 11);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        let mut xs: Vec<i64> = a.rows().iter().map(|r| r[0] as i64).collect();
        let before = xs.clone();
        xs.dedup();
        assert_eq!(xs.len(), 1000, "rows must be distinct");
        assert_eq!(xs, before, "sample keeps stream order");
    }

    #[test]
    fn schema_rejects_duplicates() {
        assert!(DataSchema::new(vec!["a".into(), "a".into()], "y".into()).is_err());
        assert!(DataSchema::new(vec![], "y".into()).is_err());
    }
}
