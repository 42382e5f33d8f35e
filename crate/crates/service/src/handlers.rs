use crate::error::ApiError;
use crate::AppState;
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::Json;
use omltune::analysis::{artifact, AnalysisKind, Artifact, ContourRequest, DEFAULT_RESOLUTION};
use omltune::dataspace::{data_report, DataReport, DatasetInfo, SplitSpec};
use omltune::experiments::{
    ExperimentRegistry, ExperimentResults, ExperimentSpec, ExperimentStatus, ExperimentSummary,
    RunState,
};
use omltune::metrics::{MetricDirection, MetricId};
use omltune::searchspace::{builtin_space, ModelId, SearchSpace};
use omltune::tuner::ProgressEvent;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

pub use omltune::analysis::CompareTable as ComparePayload;

/// Test fraction used by the summary endpoint when none is given.
const DEFAULT_TEST_SIZE: f64 = 0.3;

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

fn params(q: Params) -> Result<HashMap<String, String>, ApiError> {
    q.map(|Query(m)| m)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))
}

/// Parse an optional query parameter; empty counts as absent.
fn opt<T: FromStr>(p: &HashMap<String, String>, key: &str, code: &str) -> Result<Option<T>, ApiError> {
    match p.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| {
            ApiError::unprocessable(code, format!("'{raw}' is not a valid value for {key}"))
                .with_details(serde_json::json!([{ "field": key, "message": "not a valid value" }]))
        }),
    }
}

fn flag(p: &HashMap<String, String>, key: &str) -> bool {
    p.get(key).is_some_and(|v| matches!(v.as_str(), "1" | "true" | "yes"))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn parse_spec(body: &[u8]) -> Result<ExperimentSpec, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            ApiError::unprocessable("invalid_spec", e.to_string())
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string())
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedBody {
    pub id: String,
    pub state: RunState,
    pub status: ExperimentStatus,
}

impl CreatedBody {
    fn new(id: String, status: ExperimentStatus) -> Self {
        Self {
            id,
            state: status.state,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDetail {
    pub id: String,
    pub model_id: ModelId,
    pub status: ExperimentStatus,
    pub spec: ExperimentSpec,
    pub has_results: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPage {
    pub from: usize,
    /// Index to pass as `from` on the next poll.
    pub next: usize,
    pub state: RunState,
    pub events: Vec<ProgressEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: ModelId,
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricInfo {
    pub id: MetricId,
    pub direction: MetricDirection,
}

pub async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

pub async fn status_page(State(s): State<AppState>) -> impl IntoResponse {
    let experiments = s.registry.list().len();
    format!(
        "omltune service {}\n\nNo web UI is installed. The JSON API lives under /api.\nexperiments: {experiments}\nartifacts: {}\n",
        env!("CARGO_PKG_VERSION"),
        s.registry.store().dir().display()
    )
}

pub async fn api_not_found() -> ApiError {
    ApiError::not_found("not_found", "no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this endpoint",
    )
}

pub async fn list_datasets(State(s): State<AppState>) -> Result<Json<Vec<DatasetInfo>>, ApiError> {
    let reg = s.registry.clone();
    blocking(move || Ok(reg.data().list()?)).await.map(Json)
}

pub async fn dataset_summary(
    State(s): State<AppState>,
    Path(id): Path<String>,
    q: Params,
) -> Result<Json<DataReport>, ApiError> {
    let p = params(q)?;
    if !s.registry.data().contains(&id) {
        return Err(ApiError::not_found("dataset_not_found", format!("unknown dataset '{id}'")));
    }
    let test_size = opt(&p, "test_size", "invalid_split")?.unwrap_or(DEFAULT_TEST_SIZE);
    let n_total = opt(&p, "n_total", "invalid_split")?;
    let reg = s.registry.clone();
    blocking(move || {
        data_report(reg.data(), &id, &SplitSpec::new(n_total, test_size)).map_err(|e| {
            let e = ApiError::from(e);
            if e.body.code == "invalid_data" {
                ApiError::unprocessable("invalid_split", e.body.message)
            } else {
                e
            }
        })
    })
    .await
    .map(Json)
}

pub async fn list_models() -> Json<Vec<ModelInfo>> {
    Json(
        ModelId::ALL
            .into_iter()
            .map(|id| ModelInfo {
                id,
                space: builtin_space(id),
            })
            .collect(),
    )
}

pub async fn model_space(Path(id): Path<String>) -> Result<Json<SearchSpace>, ApiError> {
    let model = ModelId::from_str(&id)
        .map_err(|_| ApiError::not_found("model_not_found", format!("unknown model '{id}'")))?;
    Ok(Json(builtin_space(model)))
}

pub async fn list_metrics() -> Json<Vec<MetricInfo>> {
    Json(
        MetricId::ALL
            .into_iter()
            .map(|id| MetricInfo {
                id,
                direction: id.direction(),
            })
            .collect(),
    )
}

pub async fn list_experiments(State(s): State<AppState>) -> Json<Vec<ExperimentSummary>> {
    Json(s.registry.list())
}

async fn launch(
    reg: Arc<ExperimentRegistry>,
    spec: ExperimentSpec,
    overwrite: bool,
    run: bool,
) -> Result<(StatusCode, Json<CreatedBody>), ApiError> {
    let id = spec.prefix.clone();
    let status = blocking(move || {
        let status = if run {
            reg.start(spec, overwrite)?
        } else {
            reg.save(spec, overwrite)?
        };
        Ok(status)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(CreatedBody::new(id, status))))
}

pub async fn run_experiment(
    State(s): State<AppState>,
    q: Params,
    body: Bytes,
) -> Result<(StatusCode, Json<CreatedBody>), ApiError> {
    let p = params(q)?;
    launch(s.registry.clone(), parse_spec(&body)?, flag(&p, "overwrite"), true).await
}

pub async fn save_experiment(
    State(s): State<AppState>,
    q: Params,
    body: Bytes,
) -> Result<(StatusCode, Json<CreatedBody>), ApiError> {
    let p = params(q)?;
    launch(s.registry.clone(), parse_spec(&body)?, flag(&p, "overwrite"), false).await
}

pub async fn start_saved(
    State(s): State<AppState>,
    Path(id): Path<String>,
    q: Params,
) -> Result<(StatusCode, Json<CreatedBody>), ApiError> {
    let p = params(q)?;
    let spec = s.registry.spec(&id)?;
    launch(s.registry.clone(), spec, flag(&p, "overwrite"), true).await
}

pub async fn get_experiment(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ExperimentDetail>, ApiError> {
    let spec = s.registry.spec(&id)?;
    Ok(Json(ExperimentDetail {
        model_id: spec.model_id,
        status: s.registry.status(&id)?,
        has_results: s.registry.results(&id)?.is_some(),
        spec,
        id,
    }))
}

pub async fn get_spec(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ExperimentSpec>, ApiError> {
    Ok(Json(s.registry.spec(&id)?))
}

pub async fn get_results(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ExperimentResults>, ApiError> {
    s.registry.results(&id)?.map(Json).ok_or_else(|| {
        ApiError::not_found("results_not_found", format!("experiment '{id}' has not been run"))
    })
}

pub async fn stop_experiment(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<CreatedBody>, ApiError> {
    let status = s.registry.stop(&id)?;
    Ok(Json(CreatedBody::new(id, status)))
}

pub async fn events(
    State(s): State<AppState>,
    Path(id): Path<String>,
    q: Params,
) -> Result<Json<EventsPage>, ApiError> {
    let p = params(q)?;
    let from = opt(&p, "from", "invalid_params")?.unwrap_or(0);
    // Read the state first so a page that reports a terminal state already
    // holds every event.
    let state = s.registry.status(&id)?.state;
    let reg = s.registry.clone();
    let events = blocking(move || Ok(reg.events(&id, from)?)).await?;
    Ok(Json(EventsPage {
        from,
        next: from + events.len(),
        state,
        events,
    }))
}

pub async fn analysis(
    State(s): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    q: Params,
) -> Result<Json<Artifact>, ApiError> {
    let p = params(q)?;
    let kind = AnalysisKind::from_str(&kind).map_err(|m| {
        ApiError::not_found("unknown_analysis_kind", m).with_details(serde_json::json!(
            AnalysisKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>()
        ))
    })?;
    let contour = if kind == AnalysisKind::Contour {
        let i = opt::<usize>(&p, "i", "invalid_analysis_params")?;
        let j = opt::<usize>(&p, "j", "invalid_analysis_params")?;
        let resolution = opt(&p, "resolution", "invalid_analysis_params")?.unwrap_or(DEFAULT_RESOLUTION);
        match (i, j) {
            (Some(i), Some(j)) if i == j => {
                return Err(ApiError::unprocessable(
                    "invalid_analysis_params",
                    format!("contour needs two different dimensions, got {i} twice"),
                ))
            }
            (Some(i), Some(j)) => Some(ContourRequest { i, j, resolution }),
            _ => {
                return Err(ApiError::unprocessable(
                    "invalid_analysis_params",
                    "contour needs the query parameters i and j",
                ))
            }
        }
    } else {
        None
    };

    let spec = s.registry.spec(&id)?;
    let status = s.registry.status(&id)?;
    let finished = status.state.is_terminal();
    if kind.needs_finished_run() && !finished {
        return Err(ApiError::conflict(
            "analysis_not_ready",
            format!("{kind} is available once the run has ended (state: {:?})", status.state),
        ));
    }
    let results = s.registry.results(&id)?;
    let out = blocking(move || {
        let state = match results {
            Some(r) => r.tuner_state(),
            None if matches!(kind, AnalysisKind::Progress | AnalysisKind::Parallel) => {
                omltune::TunerState {
                    trials: Vec::new(),
                    surrogate: None,
                    best: None,
                    stop_reason: omltune::tuner::StopReason::Stopped,
                    elapsed_s: 0.0,
                }
            }
            None => {
                return Err(ApiError::conflict(
                    "analysis_not_ready",
                    format!("experiment '{}' has no results", spec.prefix),
                ))
            }
        };
        Ok(artifact(kind, &state, &spec.space, contour)?)
    })
    .await?;
    Ok(Json(out))
}
