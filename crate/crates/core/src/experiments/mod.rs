//! Experiment specs and results as versioned JSON files, synchronous runs
//! and a registry of background runs.
//!
//! Every experiment is identified by its prefix. Its artifacts live in one
//! directory as `<prefix>.spec.json`, `<prefix>.results.json` and
//! `<prefix>.events.ndjson`.

mod registry;
mod run;
mod store;

pub use registry::{ExperimentRegistry, ExperimentSummary};
pub use run::execute;
pub use store::{load_results, load_spec, save_spec_file, ArtifactStore, DEFAULT_DIR, DIR_ENV};

use crate::analysis::{Comparison, ParallelData, ProgressPoint};
use crate::dataspace::{DataError, DataRegistry, DataSource, ScalerKind, SplitSpec};
use crate::evaluation::{HorizonEvalConfig, WeightVector};
use crate::metrics::ConfusionCounts;
use crate::searchspace::{ModelConfig, ModelId, SearchSpace};
use crate::tuner::{
    argmin_trial, is_safe_prefix, ImportanceEntry, Kriging, StopReason, TrialRecord, TunerControl,
    TunerError, TunerState,
};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

pub const SPEC_KIND: &str = "omltune.spec";
pub const RESULTS_KIND: &str = "omltune.results";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {}", join(.0))]
    Invalid(Vec<FieldError>),
    #[error("{path} holds a '{found}' document, expected '{expected}'")]
    WrongKind {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("{path} has format_version {found}, this build reads {FORMAT_VERSION}")]
    VersionMismatch { path: PathBuf, found: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("an experiment with prefix '{0}' already exists")]
    Duplicate(String),
    #[error("experiment '{0}' is running")]
    Running(String),
    #[error("no experiment '{0}'")]
    NotFound(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
}

/// Where the data comes from and how it is split and scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataOptions {
    pub source: DataSource,
    #[serde(default)]
    pub n_total: Option<usize>,
    pub test_size: f64,
    #[serde(default)]
    pub scaler: ScalerKind,
    /// Accepted for compatibility; the target is always the last column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
}

impl DataOptions {
    pub fn split(&self) -> SplitSpec {
        SplitSpec::new(self.n_total, self.test_size)
    }
}

fn spec_kind() -> String {
    SPEC_KIND.to_string()
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "spec_kind")]
    pub kind: String,
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub prefix: String,
    pub data: DataOptions,
    pub model_id: ModelId,
    pub space: SearchSpace,
    pub eval: HorizonEvalConfig,
    #[serde(default)]
    pub weights: WeightVector,
    pub control: TunerControl,
}

impl ExperimentSpec {
    /// A spec with the model's full search space and default control
    /// settings.
    pub fn new(prefix: &str, data: DataOptions, model_id: ModelId, eval: HorizonEvalConfig) -> Self {
        Self {
            kind: spec_kind(),
            format_version: FORMAT_VERSION,
            prefix: prefix.to_string(),
            data,
            model_id,
            space: crate::searchspace::builtin_space(model_id),
            eval,
            weights: WeightVector::default(),
            control: TunerControl {
                prefix: prefix.to_string(),
                ..TunerControl::default()
            },
        }
    }

    /// Every static problem with the spec. Dataset ids are not resolved here.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut v = Vec::new();
        if self.kind != SPEC_KIND {
            v.push(FieldError::new("kind", format!("must be '{SPEC_KIND}'")));
        }
        if self.format_version != FORMAT_VERSION {
            v.push(FieldError::new(
                "format_version",
                format!("must be {FORMAT_VERSION}"),
            ));
        }
        if !is_safe_prefix(&self.prefix) {
            v.push(FieldError::new(
                "prefix",
                "must be non-empty and use only letters, digits, '_', '-' or '.'",
            ));
        }
        let split = self.data.split();
        if !(split.test_size > 0.0 && split.test_size < 1.0) {
            v.push(FieldError::new(
                "data.test_size",
                format!("must lie strictly between 0 and 1, got {}", split.test_size),
            ));
        }
        if let Some(n) = self.data.n_total {
            if n < 2 {
                v.push(FieldError::new("data.n_total", "must be at least 2"));
            }
        }
        match &self.data.source {
            DataSource::Sea(cfg) => {
                if let Err(e) = cfg.validate() {
                    v.push(FieldError::new("data.source", e.to_string()));
                }
            }
            DataSource::Dataset { id } if id.is_empty() => {
                v.push(FieldError::new("data.source.id", "must not be empty"));
            }
            DataSource::Csv { path } if path.is_empty() => {
                v.push(FieldError::new("data.source.path", "must not be empty"));
            }
            _ => {}
        }
        if self.space.model_id != self.model_id {
            v.push(FieldError::new(
                "space.model_id",
                format!("is {} but model_id is {}", self.space.model_id, self.model_id),
            ));
        } else {
            v.extend(self.space.violations().into_iter().map(|m| FieldError::new("space", m)));
        }
        if self.eval.horizon == 0 {
            v.push(FieldError::new("eval.horizon", "must be at least 1"));
        }
        for (name, w) in [
            ("weights.w_y", self.weights.w_y),
            ("weights.w_time", self.weights.w_time),
            ("weights.w_mem", self.weights.w_mem),
        ] {
            if !w.is_finite() {
                v.push(FieldError::new(name, "must be finite"));
            }
        }
        let mut control = self.control.clone();
        if control.prefix.is_empty() {
            control.prefix = self.prefix.clone();
        } else if control.prefix != self.prefix {
            v.push(FieldError::new("control.prefix", "must equal prefix"));
        }
        v.extend(control.violations().into_iter().map(|m| FieldError::new("control", m)));
        v
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invalid(v))
        }
    }

    /// Static checks plus resolution of a dataset id against `data`.
    pub fn validate_with(&self, data: &DataRegistry) -> Result<(), ExperimentError> {
        self.validate()?;
        if let DataSource::Dataset { id } = &self.data.source {
            if !data.contains(id) {
                return Err(DataError::UnknownDataset(id.clone()).into());
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub(crate) fn tuner_control(&self) -> TunerControl {
        TunerControl {
            prefix: self.prefix.clone(),
            ..self.control.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Saved,
    Running,
    Finished,
    Failed,
    Stopped,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Finished | RunState::Failed | RunState::Stopped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub state: RunState,
    pub trials_done: usize,
    pub best_objective: Option<f64>,
    pub started: Option<DateTime<Utc>>,
    pub finished: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ExperimentStatus {
    pub fn saved() -> Self {
        Self {
            state: RunState::Saved,
            trials_done: 0,
            best_objective: None,
            started: None,
            finished: None,
            message: None,
        }
    }
}

/// Analysis tables stored with a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub progress: Vec<ProgressPoint>,
    pub compare: Option<Comparison>,
    pub importance: Option<Vec<ImportanceEntry>>,
    pub parallel: ParallelData,
    pub confusion: Option<ConfusionCounts>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub kind: String,
    pub format_version: u32,
    pub prefix: String,
    pub spec_sha256: String,
    pub status: ExperimentStatus,
    pub trials: Vec<TrialRecord>,
    pub surrogate: Option<Kriging>,
    pub best: Option<usize>,
    pub best_config: Option<ModelConfig>,
    pub stop_reason: Option<StopReason>,
    pub elapsed_s: f64,
    pub analysis: Option<AnalysisBundle>,
}

impl ExperimentResults {
    pub(crate) fn new(spec: &ExperimentSpec, status: ExperimentStatus) -> Self {
        Self {
            kind: RESULTS_KIND.to_string(),
            format_version: FORMAT_VERSION,
            prefix: spec.prefix.clone(),
            spec_sha256: spec.content_hash(),
            status,
            trials: Vec::new(),
            surrogate: None,
            best: None,
            best_config: None,
            stop_reason: None,
            elapsed_s: 0.0,
            analysis: None,
        }
    }

    pub(crate) fn set_trials(&mut self, trials: Vec<TrialRecord>) {
        self.best = argmin_trial(&trials);
        self.best_config = self.best.map(|i| trials[i].model_config.clone());
        self.status.trials_done = trials.len();
        self.status.best_objective = self.best.and_then(|i| trials[i].objective);
        self.trials = trials;
    }

    /// The stored run as a tuner state, for the analysis functions.
    pub fn tuner_state(&self) -> TunerState {
        TunerState {
            trials: self.trials.clone(),
            surrogate: self.surrogate.clone(),
            best: self.best,
            stop_reason: self.stop_reason.unwrap_or(StopReason::Stopped),
            elapsed_s: self.elapsed_s,
        }
    }
}
