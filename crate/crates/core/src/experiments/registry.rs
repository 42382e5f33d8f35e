use super::run::{execute, prepare};
use super::{
    ArtifactStore, ExperimentError, ExperimentResults, ExperimentSpec, ExperimentStatus, RunState,
};
use crate::dataspace::DataRegistry;
use crate::searchspace::ModelId;
use crate::tuner::ProgressEvent;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub id: String,
    pub model_id: ModelId,
    pub status: ExperimentStatus,
}

struct Run {
    spec: ExperimentSpec,
    status: ExperimentStatus,
    stop: Arc<AtomicBool>,
    results: Option<ExperimentResults>,
    handle: Option<JoinHandle<()>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// All experiments in one artifact directory, keyed by prefix. Runs execute
/// on their own threads; every method here only takes brief locks.
pub struct ExperimentRegistry {
    store: ArtifactStore,
    data: Arc<DataRegistry>,
    runs: Mutex<BTreeMap<String, Arc<Mutex<Run>>>>,
}

impl ExperimentRegistry {
    /// Load every saved experiment in the store. A results file left in the
    /// running state by a dead process is reported as failed.
    pub fn open(store: ArtifactStore, data: Arc<DataRegistry>) -> Result<Self, ExperimentError> {
        let mut runs = BTreeMap::new();
        for prefix in store.prefixes()? {
            let spec = match store.load_spec(&prefix) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("skipping {prefix}: {e}");
                    continue;
                }
            };
            let results = match store.load_results(&prefix) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("ignoring results of {prefix}: {e}");
                    None
                }
            };
            let mut status = results
                .as_ref()
                .map_or_else(ExperimentStatus::saved, |r| r.status.clone());
            if status.state == RunState::Running {
                status.state = RunState::Failed;
                status.message = Some("interrupted before it finished".into());
            }
            runs.insert(
                prefix,
                Arc::new(Mutex::new(Run {
                    spec,
                    status,
                    stop: Arc::new(AtomicBool::new(false)),
                    results,
                    handle: None,
                })),
            );
        }
        Ok(Self {
            store,
            data,
            runs: Mutex::new(runs),
        })
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    pub fn data(&self) -> &DataRegistry {
        &self.data
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Run>>, ExperimentError> {
        lock(&self.runs)
            .get(id)
            .cloned()
            .ok_or_else(|| ExperimentError::NotFound(id.to_string()))
    }

    /// Reject a prefix that is running, or that already has an experiment
    /// (other than a merely saved one when `allow_saved`) unless overwriting.
    fn claim(
        runs: &BTreeMap<String, Arc<Mutex<Run>>>,
        prefix: &str,
        overwrite: bool,
        allow_saved: bool,
    ) -> Result<(), ExperimentError> {
        if let Some(existing) = runs.get(prefix) {
            let state = lock(existing).status.state;
            if state == RunState::Running {
                return Err(ExperimentError::Duplicate(prefix.to_string()));
            }
            if !overwrite && !(allow_saved && state == RunState::Saved) {
                return Err(ExperimentError::Duplicate(prefix.to_string()));
            }
        }
        Ok(())
    }

    fn clear_outputs(&self, prefix: &str) {
        for path in [self.store.results_path(prefix), self.store.events_path(prefix)] {
            if let Err(e) = fs::remove_file(&path) {
                if e.kind() != std::io::ErrorKind::NotFound {
                    log::warn!("could not remove {}: {e}", path.display());
                }
            }
        }
    }

    /// Validate and persist a spec without running it.
    pub fn save(&self, spec: ExperimentSpec, overwrite: bool) -> Result<ExperimentStatus, ExperimentError> {
        spec.validate_with(&self.data)?;
        let mut runs = lock(&self.runs);
        Self::claim(&runs, &spec.prefix, overwrite, false)?;
        self.store.save_spec(&spec)?;
        self.clear_outputs(&spec.prefix);
        let status = ExperimentStatus::saved();
        runs.insert(
            spec.prefix.clone(),
            Arc::new(Mutex::new(Run {
                spec,
                status: status.clone(),
                stop: Arc::new(AtomicBool::new(false)),
                results: None,
                handle: None,
            })),
        );
        Ok(status)
    }

    /// Persist the spec and run it in the background. A saved (never run)
    /// experiment with the same prefix is replaced.
    pub fn start(&self, spec: ExperimentSpec, overwrite: bool) -> Result<ExperimentStatus, ExperimentError> {
        prepare(&spec, &self.data)?;
        let mut runs = lock(&self.runs);
        Self::claim(&runs, &spec.prefix, overwrite, true)?;
        self.store.save_spec(&spec)?;
        self.clear_outputs(&spec.prefix);

        let status = ExperimentStatus {
            state: RunState::Running,
            started: Some(Utc::now()),
            ..ExperimentStatus::saved()
        };
        let stop = Arc::new(AtomicBool::new(false));
        let run = Arc::new(Mutex::new(Run {
            spec: spec.clone(),
            status: status.clone(),
            stop: stop.clone(),
            results: None,
            handle: None,
        }));
        let worker = run.clone();
        let store = self.store.clone();
        let data = self.data.clone();
        let handle = std::thread::Builder::new()
            .name(format!("run-{}", spec.prefix))
            .spawn(move || {
                let outcome = execute(&spec, &data, &store, &stop, &mut |_, r| {
                    let mut g = lock(&worker);
                    g.status = r.status.clone();
                    g.results = Some(r.clone());
                });
                let mut g = lock(&worker);
                match outcome {
                    Ok(r) => {
                        g.status = r.status.clone();
                        g.results = Some(r);
                    }
                    Err(e) => {
                        log::error!("experiment {} failed: {e}", spec.prefix);
                        g.status.state = RunState::Failed;
                        g.status.finished = Some(Utc::now());
                        g.status.message = Some(e.to_string());
                        if let Ok(Some(r)) = store.load_results(&spec.prefix) {
                            g.results = Some(r);
                        }
                    }
                }
            })
            .map_err(|source| ExperimentError::Io {
                path: self.store.dir().to_path_buf(),
                source,
            })?;
        lock(&run).handle = Some(handle);
        runs.insert(run_prefix(&run), run);
        Ok(status)
    }

    /// Ask a run to stop at the next trial boundary. Idempotent.
    pub fn stop(&self, id: &str) -> Result<ExperimentStatus, ExperimentError> {
        let run = self.get(id)?;
        let g = lock(&run);
        if g.status.state == RunState::Running {
            g.stop.store(true, Ordering::Relaxed);
        }
        Ok(g.status.clone())
    }

    pub fn status(&self, id: &str) -> Result<ExperimentStatus, ExperimentError> {
        let run = self.get(id)?;
        let v = lock(&run).status.clone();
        Ok(v)
    }

    pub fn spec(&self, id: &str) -> Result<ExperimentSpec, ExperimentError> {
        let run = self.get(id)?;
        let v = lock(&run).spec.clone();
        Ok(v)
    }

    /// Latest persisted results (partial while running).
    pub fn results(&self, id: &str) -> Result<Option<ExperimentResults>, ExperimentError> {
        let run = self.get(id)?;
        let v = lock(&run).results.clone();
        Ok(v)
    }

    pub fn list(&self) -> Vec<ExperimentSummary> {
        lock(&self.runs)
            .iter()
            .map(|(id, run)| {
                let g = lock(run);
                ExperimentSummary {
                    id: id.clone(),
                    model_id: g.spec.model_id,
                    status: g.status.clone(),
                }
            })
            .collect()
    }

    pub fn events(&self, id: &str, from: usize) -> Result<Vec<ProgressEvent>, ExperimentError> {
        self.get(id)?;
        self.store.read_events(id, from)
    }

    /// Block until the run's thread has finished.
    pub fn wait(&self, id: &str) -> Result<ExperimentStatus, ExperimentError> {
        let run = self.get(id)?;
        let handle = lock(&run).handle.take();
        if let Some(h) = handle {
            if h.join().is_err() {
                let mut g = lock(&run);
                g.status.state = RunState::Failed;
                g.status.message = Some("run thread panicked".into());
            }
        }
        let status = lock(&run).status.clone();
        Ok(status)
    }
}

fn run_prefix(run: &Arc<Mutex<Run>>) -> String {
    lock(run).spec.prefix.clone()
}
