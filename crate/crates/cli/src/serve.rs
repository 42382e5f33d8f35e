use crate::CliError;
use clap::Args;
use omltune::dataspace::DataRegistry;
use omltune::experiments::{ArtifactStore, ExperimentRegistry, RunState};
use omltune_service::{AppState, DEFAULT_ADDR};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on.
    #[arg(long, default_value = DEFAULT_ADDR)]
    pub addr: String,
    /// Directory with the built web UI (must contain index.html).
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

pub fn serve(data: DataRegistry, dir: &Path, args: &ServeArgs) -> Result<(), CliError> {
    let addr: SocketAddr = args
        .addr
        .parse()
        .map_err(|e| CliError::Invalid(format!("--addr {}: {e}", args.addr)))?;
    let registry = Arc::new(ExperimentRegistry::open(ArtifactStore::new(dir), Arc::new(data))?);
    let mut state = AppState::new(registry.clone());
    if let Some(ui) = &args.ui {
        if !ui.join("index.html").is_file() {
            eprintln!("warning: {} has no index.html; serving the status page", ui.display());
        }
        state = state.with_ui_dir(ui);
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start runtime: {e}")))?;
    rt.block_on(async {
        let listener = omltune_service::bind(addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().unwrap_or(addr);
        println!("listening on http://{local}");
        println!("artifacts: {}", dir.display());
        let _ = std::io::stdout().flush();
        omltune_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))
    })?;

    // Let running experiments end cleanly so their results are not left
    // in the running state.
    for s in registry.list() {
        if s.status.state == RunState::Running {
            eprintln!("stopping {}", s.id);
            let _ = registry.stop(&s.id);
            let _ = registry.wait(&s.id);
        }
    }
    Ok(())
}
