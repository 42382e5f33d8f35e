//! HTTP JSON API for datasets, experiment lifecycle, live progress and
//! analysis artifacts. Every handler goes through [`ExperimentRegistry`];
//! tuning runs on the registry's own threads, never on a request task.

mod error;
mod handlers;

pub use error::{ApiError, ErrorBody};
pub use handlers::{ComparePayload, CreatedBody, EventsPage, ExperimentDetail, MetricInfo, ModelInfo};

use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;
use omltune::experiments::ExperimentRegistry;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use tokio::net::TcpListener;
use tower_http::services::{ServeDir, ServeFile};

pub const DEFAULT_ADDR: &str = "127.0.0.1:6006";

/// Shared state of all handlers.
#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<ExperimentRegistry>,
    /// Directory with built web UI assets, served at `/` when it holds an
    /// `index.html`.
    pub ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(registry: Arc<ExperimentRegistry>) -> Self {
        Self {
            registry,
            ui_dir: None,
        }
    }

    pub fn with_ui_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.ui_dir = Some(dir.into());
        self
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/health", get(handlers::health))
        .route("/api/datasets", get(handlers::list_datasets))
        .route("/api/datasets/{id}/summary", get(handlers::dataset_summary))
        .route("/api/models", get(handlers::list_models))
        .route("/api/models/{id}/space", get(handlers::model_space))
        .route("/api/metrics", get(handlers::list_metrics))
        .route(
            "/api/experiments",
            get(handlers::list_experiments).post(handlers::run_experiment),
        )
        .route("/api/experiments/save", post(handlers::save_experiment))
        .route("/api/experiments/{id}", get(handlers::get_experiment))
        .route("/api/experiments/{id}/spec", get(handlers::get_spec))
        .route("/api/experiments/{id}/results", get(handlers::get_results))
        .route("/api/experiments/{id}/start", post(handlers::start_saved))
        .route("/api/experiments/{id}/stop", post(handlers::stop_experiment))
        .route("/api/experiments/{id}/events", get(handlers::events))
        .route("/api/experiments/{id}/analysis/{kind}", get(handlers::analysis))
        .route("/api/{*rest}", axum::routing::any(handlers::api_not_found))
        .method_not_allowed_fallback(handlers::method_not_allowed);

    let ui_index = state
        .ui_dir
        .as_ref()
        .map(|d| d.join("index.html"))
        .filter(|p| p.is_file());
    let app = match (ui_index, &state.ui_dir) {
        (Some(index), Some(dir)) => {
            api.fallback_service(ServeDir::new(dir).not_found_service(ServeFile::new(index)))
        }
        _ => api
            .route("/", get(handlers::status_page))
            .fallback(|| async { (StatusCode::NOT_FOUND, "not found\n") }),
    };
    app.with_state(state)
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
