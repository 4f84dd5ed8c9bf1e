//! Local HTTP backend for the design-blending tool.
//!
//! Serves the context library, headset profiles, design uploads, batch blend
//! jobs and single-frame previews. Batch frames and previews go through the
//! same [`simulatar::pipeline::FrameRenderer`] and PNG encoder, so a preview
//! is byte-identical to the matching job frame.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::response::Html;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::{ServeDir, ServeFile};

mod api;
pub mod error;
pub mod pool;
pub mod state;

pub use error::{ApiError, StartupError};
pub use state::{AppState, JobRecord, JobSpec, JobState, Progress};

pub const DEFAULT_UPLOAD_LIMIT: usize = 10 * 1024 * 1024;
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Root of the asset library (`contexts/<id>/{meta.json, frames/}`).
    pub assets: PathBuf,
    /// Where uploads and job outputs are stored.
    pub data_dir: PathBuf,
    pub profiles_config: Option<PathBuf>,
    pub upload_limit: usize,
    pub workers: usize,
    /// Built web UI, served at `/` when present.
    pub web_root: Option<PathBuf>,
    pub transcoder: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(assets: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            assets: assets.into(),
            data_dir: data_dir.into(),
            profiles_config: None,
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            web_root: None,
            transcoder: None,
        }
    }

    pub fn designs_dir(&self) -> PathBuf {
        self.data_dir.join("designs")
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.data_dir.join("jobs")
    }
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>simulatar</title>\
<p>The web UI is not built. The API is described at <a href=\"/api/schema\">/api/schema</a>.</p>";

pub fn router(state: Arc<AppState>) -> Router {
    // Leave headroom over the cap for multipart framing; the handler enforces
    // the exact limit on the declared length.
    let body_limit = state.config.upload_limit.saturating_add(64 * 1024);
    let api = Router::new()
        .route("/api/contexts", get(api::list_contexts))
        .route("/api/contexts/{id}/thumbnail.png", get(api::context_thumbnail))
        .route("/api/profiles", get(api::list_profiles))
        .route(
            "/api/designs",
            post(api::upload_design).layer(DefaultBodyLimit::max(body_limit)),
        )
        .route("/api/jobs", post(api::create_job).get(api::list_jobs))
        .route("/api/jobs/{id}", get(api::get_job))
        .route("/api/jobs/{id}/frames/{file}", get(api::job_frame))
        .route("/api/jobs/{id}/video", get(api::job_video))
        .route("/api/preview", post(api::preview))
        .route("/api/schema", get(api::schema));
    let api = match &state.config.web_root {
        Some(root) if root.is_dir() => {
            api.fallback_service(ServeDir::new(root).fallback(ServeFile::new(root.join("index.html"))))
        }
        _ => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    api.with_state(state)
}

/// Opens the state and serves until interrupted.
pub async fn serve(config: ServiceConfig, bind: SocketAddr) -> Result<(), StartupError> {
    let state = Arc::new(AppState::open(config)?);
    tracing::info!(
        "{} contexts, {} headset profiles, {} workers",
        state.contexts.len(),
        state.registry.hmds.len(),
        state.pool.worker_count()
    );
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|source| StartupError::Bind { addr: bind, source })?;
    tracing::info!("listening on http://{bind}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| StartupError::Bind { addr: bind, source })
}
