use super::{generate_sea, load_csv, parse_csv, DataError, Dataset, Provenance, SeaConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const BANANAS_ID: &str = "bananas";
pub const DEFAULT_SEA_ID: &str = "sea";

const BANANAS_CSV: &str = include_str!("../../data/bananas.csv");

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A dataset registered by id (built-in or found in the user data directory).
    Dataset { id: String },
    /// A CSV file given by path.
    Csv { path: String },
    /// A generated SEA stream.
    Sea(SeaConfig),
}

#[derive(Debug, Clone)]
enum Entry {
    Bananas,
    Sea(SeaConfig),
    UserCsv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub source: String,
}

/// Built-in datasets plus every `*.csv` directly inside the user data directory.
#[derive(Debug, Clone)]
pub struct DataRegistry {
    entries: BTreeMap<String, Entry>,
}

impl Default for DataRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DataRegistry {
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(BANANAS_ID.to_string(), Entry::Bananas);
        entries.insert(
            DEFAULT_SEA_ID.to_string(),
            Entry::Sea(SeaConfig::single_drift(10_000, 0.1, 1)),
        );
        Self { entries }
    }

    /// Built-ins plus a non-recursive scan of `dir` for `*.csv`. The file stem
    /// is the id; a user file never shadows a built-in. A missing directory is
    /// not an error.
    pub fn with_user_dir(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let mut reg = Self::builtin();
        let dir = dir.as_ref();
        let listing = match std::fs::read_dir(dir) {
            Ok(listing) => listing,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(reg),
            Err(source) => {
                return Err(DataError::Io {
                    path: dir.to_path_buf(),
                    source,
                })
            }
        };
        let mut paths: Vec<PathBuf> = listing
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
            .collect();
        paths.sort();
        for path in paths {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                reg.entries
                    .entry(stem.to_string())
                    .or_insert(Entry::UserCsv(path.clone()));
            }
        }
        Ok(reg)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn load(&self, id: &str) -> Result<Dataset, DataError> {
        match self.entries.get(id) {
            None => Err(DataError::UnknownDataset(id.to_string())),
            Some(Entry::Bananas) => bananas(),
            Some(Entry::Sea(cfg)) => generate_sea(cfg),
            Some(Entry::UserCsv(path)) => load_csv(path),
        }
    }

    pub fn info(&self, id: &str) -> Result<DatasetInfo, DataError> {
        let d = self.load(id)?;
        let source = match &self.entries[id] {
            Entry::Bananas => "builtin:bananas".to_string(),
            Entry::Sea(cfg) => format!("generator:{}", cfg.id()),
            Entry::UserCsv(p) => format!("csv:{}", p.display()),
        };
        Ok(DatasetInfo {
            id: id.to_string(),
            n_rows: d.len(),
            n_features: d.n_features(),
            source,
        })
    }

    pub fn list(&self) -> Result<Vec<DatasetInfo>, DataError> {
        self.ids().map(|id| self.info(id)).collect()
    }

    pub fn resolve(&self, source: &DataSource) -> Result<Dataset, DataError> {
        match source {
            DataSource::Dataset { id } => self.load(id),
            DataSource::Csv { path } => load_csv(path),
            DataSource::Sea(cfg) => generate_sea(cfg),
        }
    }
}

/// The vendored two-feature Bananas stream (5300 rows).
pub fn bananas() -> Result<Dataset, DataError> {
    parse_csv(
        BANANAS_CSV.as_bytes(),
        Provenance::Generator {
            id: BANANAS_ID.into(),
        },
    )
}
