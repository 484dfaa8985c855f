//! Single-writer training queue. Handlers enqueue and return immediately;
//! one worker thread runs jobs in order.

use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use agriprice_core::engine::{evaluate_commodity, fit_winner, save_artifact, EngineConfig, EvaluationReport, Mode};

use crate::error::ServiceResult;
use crate::store::{ArtifactRow, JobRow, Store};
use crate::FORECAST_STEPS;

struct Job {
    id: String,
    commodity: String,
    mode: Mode,
}

pub struct JobQueue {
    sender: Mutex<Option<Sender<Job>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
    store: Arc<Store>,
}

impl JobQueue {
    pub fn start(store: Arc<Store>, artifact_dir: PathBuf, config: EngineConfig) -> Self {
        let (tx, rx) = channel::<Job>();
        let worker_store = Arc::clone(&store);
        let worker = std::thread::Builder::new()
            .name("training".into())
            .spawn(move || {
                for job in rx {
                    let _ = worker_store.set_job_status(&job.id, "running", None);
                    match train_pair(&worker_store, &artifact_dir, &config, &job.commodity, job.mode) {
                        Ok(_) => {
                            log::info!("job {} finished ({} {})", job.id, job.commodity, job.mode.as_str());
                            let _ = worker_store.set_job_status(&job.id, "done", None);
                        }
                        Err(e) => {
                            log::warn!("job {} failed: {e}", job.id);
                            let _ = worker_store.set_job_status(&job.id, "failed", Some(&e.to_string()));
                        }
                    }
                }
            })
            .expect("spawn training thread");
        Self {
            sender: Mutex::new(Some(tx)),
            worker: Mutex::new(Some(worker)),
            store,
        }
    }

    /// Queues training for the pair unless a job for it is already pending;
    /// returns the pending or new job.
    pub fn submit(&self, commodity: &str, mode: Mode) -> ServiceResult<JobRow> {
        let guard = self.sender.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(active) = self.store.active_job(commodity, mode.as_str())? {
            return Ok(active);
        }
        let id = crate::auth::new_token();
        self.store.create_job(&id, commodity, mode.as_str())?;
        let job = Job {
            id: id.clone(),
            commodity: commodity.to_string(),
            mode,
        };
        let sent = guard.as_ref().map(|tx| tx.send(job).is_ok()).unwrap_or(false);
        if !sent {
            self.store.set_job_status(&id, "failed", Some("training queue is shut down"))?;
        }
        Ok(self.store.job(&id)?.expect("job row just inserted"))
    }

    /// Stops accepting jobs and waits for the queued ones to drain.
    pub fn shutdown(&self) {
        self.sender.lock().unwrap_or_else(|p| p.into_inner()).take();
        if let Some(handle) = self.worker.lock().unwrap_or_else(|p| p.into_inner()).take() {
            let _ = handle.join();
        }
    }
}

impl Drop for JobQueue {
    fn drop(&mut self) {
        self.sender.lock().unwrap_or_else(|p| p.into_inner()).take();
    }
}

/// Evaluates every family for the mode, refits the winner on all data,
/// persists the artifact and precomputes the forecast cache.
pub fn train_pair(
    store: &Store,
    artifact_dir: &Path,
    config: &EngineConfig,
    commodity: &str,
    mode: Mode,
) -> ServiceResult<(EvaluationReport, ArtifactRow)> {
    let raw = store.load_frame(commodity)?;
    let report = evaluate_commodity(commodity, &raw, &[mode], config);
    let artifact = fit_winner(&report, &raw, config)?;
    let path = save_artifact(artifact_dir, &artifact)?;
    // artifact files are named after their content hash
    let content_hash = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let row = ArtifactRow {
        family: artifact.spec.family.as_str().to_string(),
        fingerprint: artifact.fingerprint.clone(),
        content_hash,
        path: path.display().to_string(),
    };
    store.put_artifact(commodity, mode.as_str(), &row)?;
    let values = artifact.forecast(FORECAST_STEPS)?;
    // tagged with the fingerprint the model was fitted on, so rows that
    // arrived during training leave the entry stale
    store.put_forecast(commodity, mode.as_str(), &row.family, &row.fingerprint, &values)?;
    Ok((report, row))
}
