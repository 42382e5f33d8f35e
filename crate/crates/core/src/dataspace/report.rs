use super::{split_train_test, summarize, DataError, DataRegistry, DataSummary, SplitSpec, DISPLAY_CAP};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seed for the display subsample, so repeated reports are identical.
pub const DISPLAY_SEED: u64 = 0;

/// Rows picked for plotting, in stream order. `test[i]` tells whether row
/// `i` came from the test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplaySample {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub test: Vec<bool>,
}

/// Everything the data view shows for one dataset and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataReport {
    pub id: String,
    pub n_total: Option<usize>,
    pub test_size: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train: DataSummary,
    pub test: DataSummary,
    pub display_sample: DisplaySample,
}

pub fn data_report(reg: &DataRegistry, id: &str, split: &SplitSpec) -> Result<DataReport, DataError> {
    let d = reg.load(id)?;
    let (train, test) = split_train_test(&d, split)?;
    let n = train.len() + test.len();
    let mut rng = ChaCha8Rng::seed_from_u64(DISPLAY_SEED);
    let mut idx = if n <= DISPLAY_CAP {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut rng, n, DISPLAY_CAP).into_vec()
    };
    idx.sort_unstable();
    let display_sample = DisplaySample {
        columns: d.schema.feature_names.clone(),
        rows: idx.iter().map(|&i| d.features(i).to_vec()).collect(),
        labels: idx.iter().map(|&i| d.label(i)).collect(),
        test: idx.iter().map(|&i| i >= train.len()).collect(),
    };
    Ok(DataReport {
        id: id.to_string(),
        n_total: split.n_total,
        test_size: split.test_size,
        n_train: train.len(),
        n_test: test.len(),
        train: summarize(&train)?,
        test: summarize(&test)?,
        display_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::BANANAS_ID;

    #[test]
    fn bananas_report() {
        let reg = DataRegistry::builtin();
        let r = data_report(&reg, BANANAS_ID, &SplitSpec::new(None, 0.3)).unwrap();
        assert_eq!((r.n_train, r.n_test), (3710, 1590));
        assert_eq!(r.train.columns[0].count, 3710);
        let s = &r.display_sample;
        assert_eq!(s.rows.len(), DISPLAY_CAP);
        assert_eq!(s.labels.len(), DISPLAY_CAP);
        assert!(s.test.iter().any(|&t| t) && s.test.iter().any(|&t| !t));
        assert_eq!(r, data_report(&reg, BANANAS_ID, &SplitSpec::new(None, 0.3)).unwrap());
    }

    #[test]
    fn small_split_keeps_every_row() {
        let reg = DataRegistry::builtin();
        let r = data_report(&reg, BANANAS_ID, &SplitSpec::new(Some(100), 0.25)).unwrap();
        assert_eq!(r.display_sample.rows.len(), 100);
        assert_eq!(r.display_sample.test.iter().filter(|&&t| t).count(), 25);
    }

    #[test]
    fn errors_pass_through() {
        let reg = DataRegistry::builtin();
        assert!(matches!(
            data_report(&reg, "nope", &SplitSpec::new(None, 0.3)),
            Err(DataError::UnknownDataset(_))
        ));
        assert!(matches!(
            data_report(&reg, BANANAS_ID, &SplitSpec::new(None, 0.0)),
            Err(DataError::Config(_))
        ));
    }
}
