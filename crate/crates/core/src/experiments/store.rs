use super::{ExperimentError, ExperimentResults, ExperimentSpec, FORMAT_VERSION, RESULTS_KIND, SPEC_KIND};
use crate::tuner::ProgressEvent;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const DIR_ENV: &str = "OMLTUNE_DIR";
pub const DEFAULT_DIR: &str = "experiments";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn to_pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

/// Read a versioned document, checking `kind` and `format_version` first.
fn load_doc<T: DeserializeOwned>(path: &Path, expected: &'static str) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parse = |e: serde_json::Error| ExperimentError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
    let kind = value.get("kind").and_then(|k| k.as_str()).unwrap_or(expected);
    if kind != expected {
        return Err(ExperimentError::WrongKind {
            path: path.to_path_buf(),
            expected,
            found: kind.to_string(),
        });
    }
    if let Some(found) = value.get("format_version").and_then(|v| v.as_u64()) {
        if found != u64::from(FORMAT_VERSION) {
            return Err(ExperimentError::VersionMismatch {
                path: path.to_path_buf(),
                found,
            });
        }
    }
    serde_json::from_value(value).map_err(parse)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec, ExperimentError> {
    load_doc(path.as_ref(), SPEC_KIND)
}

/// Validate and write a spec to an arbitrary path, in the same encoding the
/// store uses.
pub fn save_spec_file(path: impl AsRef<Path>, spec: &ExperimentSpec) -> Result<PathBuf, ExperimentError> {
    spec.validate()?;
    let path = path.as_ref();
    write_atomic(path, &to_pretty(spec))?;
    Ok(path.to_path_buf())
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ExperimentResults, ExperimentError> {
    load_doc(path.as_ref(), RESULTS_KIND)
}

/// The directory holding experiment artifacts.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: PathBuf,
}

impl ArtifactStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$OMLTUNE_DIR`, or `./experiments`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_DIR), PathBuf::from))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn spec_path(&self, prefix: &str) -> PathBuf {
        self.dir.join(format!("{prefix}.spec.json"))
    }

    pub fn results_path(&self, prefix: &str) -> PathBuf {
        self.dir.join(format!("{prefix}.results.json"))
    }

    pub fn events_path(&self, prefix: &str) -> PathBuf {
        self.dir.join(format!("{prefix}.events.ndjson"))
    }

    /// Validate and write `<prefix>.spec.json`.
    pub fn save_spec(&self, spec: &ExperimentSpec) -> Result<PathBuf, ExperimentError> {
        save_spec_file(self.spec_path(&spec.prefix), spec)
    }

    pub fn load_spec(&self, prefix: &str) -> Result<ExperimentSpec, ExperimentError> {
        load_spec(self.spec_path(prefix))
    }

    pub fn write_results(&self, r: &ExperimentResults) -> Result<PathBuf, ExperimentError> {
        let path = self.results_path(&r.prefix);
        write_atomic(&path, &to_pretty(r))?;
        Ok(path)
    }

    pub fn load_results(&self, prefix: &str) -> Result<Option<ExperimentResults>, ExperimentError> {
        let path = self.results_path(prefix);
        if !path.exists() {
            return Ok(None);
        }
        load_results(path).map(Some)
    }

    /// Start an empty event log, replacing an old one.
    pub fn reset_events(&self, prefix: &str) -> Result<(), ExperimentError> {
        let path = self.events_path(prefix);
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        fs::File::create(&path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn append_event(&self, prefix: &str, e: &ProgressEvent) -> Result<(), ExperimentError> {
        let path = self.events_path(prefix);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut line = serde_json::to_vec(e).expect("event serializes");
        line.push(b'\n');
        f.write_all(&line).map_err(io_err(&path))
    }

    /// Events from index `from` on. A missing log reads as empty.
    pub fn read_events(&self, prefix: &str, from: usize) -> Result<Vec<ProgressEvent>, ExperimentError> {
        let path = self.events_path(prefix);
        let f = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if i < from || line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| ExperimentError::Parse {
                path: path.clone(),
                message: format!("line {}: {e}", i + 1),
            })?);
        }
        Ok(out)
    }

    /// Prefixes of every `*.spec.json` in the directory, sorted.
    pub fn prefixes(&self) -> Result<Vec<String>, ExperimentError> {
        let listing = match fs::read_dir(&self.dir) {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&self.dir)(e)),
        };
        let mut out: Vec<String> = listing
            .filter_map(Result::ok)
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".spec.json"))
                    .map(String::from)
            })
            .collect();
        out.sort();
        Ok(out)
    }
}
