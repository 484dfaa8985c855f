//! JSON-over-HTTP service for commodity price history and forecasts.
//!
//! Everything lives under `/api/v1`. Forecasts come from the winning model
//! of a training job; jobs run on a background queue and the first request
//! for a commodity/mode pair answers 202 with a job id to poll.

pub mod api;
pub mod auth;
pub mod config;
pub mod error;
pub mod jobs;
pub mod store;

use std::future::Future;
use std::sync::Arc;

use agriprice_core::engine::{fingerprint, preprocess};
use agriprice_core::ingest::{generate_synthetic, MissingPolicy, SyntheticSpec};
use agriprice_core::FeatureFrame;

pub use api::router;
pub use config::ServiceConfig;
pub use error::{ApiError, ServiceError, ServiceResult};
pub use store::Store;

use jobs::JobQueue;

/// Steps precomputed per trained model; shorter horizons are prefixes.
pub const FORECAST_STEPS: usize = 52;

/// Fingerprint of the data a model would be trained on under `policy`.
pub fn data_fingerprint(raw: &FeatureFrame, policy: MissingPolicy) -> agriprice_core::Result<String> {
    fingerprint(&preprocess(raw, policy)?)
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub jobs: Arc<JobQueue>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    /// Opens (or creates) the store under the configured data directory and
    /// starts the training worker.
    pub fn open(config: ServiceConfig) -> ServiceResult<Self> {
        std::fs::create_dir_all(&config.data_dir)?;
        let store = Arc::new(Store::open(config.database_path())?);
        Self::with_store(config, store)
    }

    pub fn with_store(config: ServiceConfig, store: Arc<Store>) -> ServiceResult<Self> {
        let abandoned = store.fail_unfinished_jobs()?;
        if abandoned > 0 {
            log::warn!("{abandoned} unfinished training job(s) from a previous run marked failed");
        }
        let jobs = Arc::new(JobQueue::start(
            Arc::clone(&store),
            config.artifact_dir(),
            config.engine.clone(),
        ));
        Ok(Self {
            store,
            jobs,
            config: Arc::new(config),
        })
    }

    /// Stores `frame` as the full history of `commodity`, replacing any
    /// previous rows. Cached forecasts go stale through the fingerprint.
    pub fn ingest(&self, commodity: &str, frame: &FeatureFrame) -> ServiceResult<()> {
        let fp = data_fingerprint(frame, self.config.engine.policy)?;
        self.store.put_series(commodity, frame, &fp)
    }

    /// Loads every synthetic preset; returns the commodity names.
    pub fn seed_synthetic(&self, seed: u64, weeks: Option<usize>) -> ServiceResult<Vec<String>> {
        let mut names = Vec::new();
        for (i, name) in SyntheticSpec::preset_names().into_iter().enumerate() {
            let mut spec = SyntheticSpec::preset(name, seed.wrapping_add(i as u64)).expect("listed preset exists");
            if let Some(w) = weeks {
                spec.n_weeks = w;
            }
            self.ingest(name, &generate_synthetic(&spec)?)?;
            names.push(name.to_string());
        }
        Ok(names)
    }
}

/// Serves until `shutdown` resolves, then lets queued training finish.
pub async fn serve(state: AppState, shutdown: impl Future<Output = ()> + Send + 'static) -> ServiceResult<()> {
    let listener = tokio::net::TcpListener::bind(state.config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let jobs = Arc::clone(&state.jobs);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    tokio::task::spawn_blocking(move || jobs.shutdown())
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?;
    Ok(())
}
