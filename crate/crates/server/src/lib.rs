//! HTTP service over the screenwise engine.
//!
//! Every endpoint is a thin layer over a library call; request and response
//! envelopes use camelCase, embedded engine types keep their own field names.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

use screenwise_core::bundled;
use screenwise_core::{InterventionCatalog, Network, PreferenceParams};

mod elicitation;
pub mod error;
mod jobs;
mod routes;

pub use error::ApiError;
pub use jobs::{JobRecord, JobStatus, PopulationRef};

/// Service configuration; every field has a default.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Model document; the bundled network when absent.
    pub model_path: Option<PathBuf>,
    /// Catalog document; the default catalog when absent.
    pub catalog_path: Option<PathBuf>,
    pub addr: SocketAddr,
    /// Where allocation jobs are persisted. Relative population paths are
    /// resolved against it too.
    pub work_dir: PathBuf,
    /// Concurrent allocation jobs.
    pub workers: usize,
    pub params: PreferenceParams,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            model_path: None,
            catalog_path: None,
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            work_dir: PathBuf::from("screenwise-work"),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            params: PreferenceParams::default(),
        }
    }
}

pub struct AppState {
    pub network: Arc<Network>,
    pub catalog: Arc<InterventionCatalog>,
    pub params: PreferenceParams,
    pub work_dir: PathBuf,
    sessions: elicitation::SessionStore,
    jobs: jobs::JobStore,
}

impl AppState {
    /// Loads model and catalog and reopens jobs persisted in the work dir.
    pub fn new(config: &ServerConfig) -> screenwise_core::Result<Self> {
        let network = match &config.model_path {
            Some(p) => Network::from_path(p)?,
            None => bundled::crc_network(),
        };
        let catalog = match &config.catalog_path {
            Some(p) => InterventionCatalog::from_path(p)?,
            None => screenwise_core::screening::default_catalog(),
        };
        config.params.validate()?;
        std::fs::create_dir_all(config.work_dir.join("jobs"))?;
        let jobs = jobs::JobStore::open(&config.work_dir, config.workers.max(1))?;
        Ok(Self {
            network: Arc::new(network),
            catalog: Arc::new(catalog),
            params: config.params.clone(),
            work_dir: config.work_dir.clone(),
            sessions: elicitation::SessionStore::default(),
            jobs,
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/posterior", post(routes::posterior))
        .route("/v1/recommend", post(routes::recommend))
        .route("/v1/elicitation/sessions", post(elicitation::create))
        .route("/v1/elicitation/sessions/:id/answers", post(elicitation::answer))
        .route("/v1/elicitation/sessions/:id/result", get(elicitation::result))
        .route("/v1/allocations", post(jobs::submit))
        .route("/v1/allocations/:id", get(jobs::status))
        .route("/v1/devices/benchmark", post(routes::benchmark_device))
        .route("/v1/curves/vinfo", get(routes::curves))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = Arc::new(AppState::new(&config)?);
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
