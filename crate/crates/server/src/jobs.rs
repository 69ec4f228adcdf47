use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use screenwise_core::par::Exec;
use screenwise_core::policy::{ComplicationMode, EvalOptions};
use screenwise_core::population::{
    allocate, generate_population, simulate, AllocationMode, AllocationResult, OperationalLimits, Population,
    SimulationReport, StrategyCache,
};
use screenwise_core::preference::PreferenceOverrides;

use crate::error::ApiError;
use crate::AppState;

/// Where a job's population comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PopulationRef {
    /// CSV file; relative paths are resolved against the work dir.
    Path(PathBuf),
    /// Synthetic population sampled from the loaded model.
    Generate { size: usize, seed: u64 },
}

pub fn resolve(state: &AppState, path: &FsPath) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        state.work_dir.join(path)
    }
}

/// Reads or generates the population and fills in posteriors.
pub fn load_population(state: &AppState, r: &PopulationRef) -> Result<Population, ApiError> {
    let mut pop = match r {
        PopulationRef::Path(p) => {
            let path = resolve(state, p);
            if !path.is_file() {
                return Err(ApiError::not_found(format!(
                    "population file `{}` not found",
                    p.display()
                )));
            }
            Population::from_path(&state.network, &path)?
        }
        PopulationRef::Generate { size, seed } => generate_population(&state.network, *size, *seed, Exec::Parallel)?,
    };
    pop.compute_posteriors(&state.network, Exec::Parallel)?;
    Ok(pop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AllocationRequest {
    pub population: PopulationRef,
    #[serde(default)]
    pub limits: OperationalLimits,
    #[serde(default)]
    pub overrides: PreferenceOverrides,
    #[serde(default)]
    pub mode: AllocationMode,
    #[serde(default)]
    pub complication_mode: ComplicationMode,
    /// Simulation runs; 0 skips the simulation.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_runs() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobRecord {
    pub id: String,
    pub status: JobStatus,
    pub request: AllocationRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct JobStore {
    dir: PathBuf,
    next: AtomicU64,
    jobs: Mutex<HashMap<String, Arc<JobRecord>>>,
    workers: Arc<Semaphore>,
}

impl JobStore {
    /// Reloads persisted jobs. Jobs that were still queued or running when
    /// the previous process stopped are marked failed.
    pub fn open(work_dir: &FsPath, workers: usize) -> std::io::Result<Self> {
        let dir = work_dir.join("jobs");
        let mut jobs = HashMap::new();
        let mut max = 0;
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let mut rec: JobRecord = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("skipping unreadable job file {}: {e}", path.display());
                    continue;
                }
            };
            if matches!(rec.status, JobStatus::Queued | JobStatus::Running) {
                rec.status = JobStatus::Failed;
                rec.error = Some("interrupted by a server restart".into());
                persist(&dir, &rec)?;
            }
            if let Some(n) = rec.id.strip_prefix('a').and_then(|n| n.parse::<u64>().ok()) {
                max = max.max(n);
            }
            jobs.insert(rec.id.clone(), Arc::new(rec));
        }
        Ok(Self {
            dir,
            next: AtomicU64::new(max),
            jobs: Mutex::new(jobs),
            workers: Arc::new(Semaphore::new(workers)),
        })
    }

    fn get(&self, id: &str) -> Option<Arc<JobRecord>> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    fn put(&self, rec: JobRecord) {
        if let Err(e) = persist(&self.dir, &rec) {
            log::error!("could not persist job {}: {e}", rec.id);
        }
        self.jobs.lock().unwrap().insert(rec.id.clone(), Arc::new(rec));
    }
}

fn persist(dir: &FsPath, rec: &JobRecord) -> std::io::Result<()> {
    let tmp = dir.join(format!("{}.json.tmp", rec.id));
    std::fs::write(&tmp, serde_json::to_vec(rec).map_err(std::io::Error::other)?)?;
    std::fs::rename(tmp, dir.join(format!("{}.json", rec.id)))
}

fn run(state: &AppState, req: &AllocationRequest) -> Result<(AllocationResult, Option<SimulationReport>), ApiError> {
    let params = req.overrides.apply(&state.params)?;
    let pop = load_population(state, &req.population)?;
    let options = EvalOptions {
        mode: req.complication_mode,
        ..Default::default()
    };
    let cache = StrategyCache::build(&pop, &state.catalog, &params, options)?;
    let alloc = allocate(&pop, &cache, &req.limits, req.mode);
    let sim = match req.runs {
        0 => None,
        runs => Some(simulate(&pop, &alloc, &state.catalog, runs, req.seed, Exec::Parallel)?),
    };
    Ok((alloc, sim))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct Submitted {
    pub id: String,
    pub status: JobStatus,
}

pub async fn submit(
    State(s): State<Arc<AppState>>,
    Json(req): Json<AllocationRequest>,
) -> Result<(StatusCode, Json<Submitted>), ApiError> {
    req.overrides.apply(&s.params)?;
    match &req.population {
        PopulationRef::Path(p) if !resolve(&s, p).is_file() => {
            return Err(ApiError::not_found(format!(
                "population file `{}` not found",
                p.display()
            )));
        }
        PopulationRef::Generate { size: 0, .. } => {
            return Err(ApiError::bad_request("population size must be positive"))
        }
        _ => {}
    }
    let id = format!("a{}", s.jobs.next.fetch_add(1, Ordering::Relaxed) + 1);
    let rec = JobRecord {
        id: id.clone(),
        status: JobStatus::Queued,
        request: req,
        allocation: None,
        simulation: None,
        error: None,
    };
    s.jobs.put(rec.clone());
    let state = s.clone();
    tokio::spawn(async move {
        let Ok(_permit) = state.jobs.workers.clone().acquire_owned().await else {
            return;
        };
        state.jobs.put(JobRecord {
            status: JobStatus::Running,
            ..rec.clone()
        });
        let worker = state.clone();
        let req = rec.request.clone();
        let outcome = tokio::task::spawn_blocking(move || run(&worker, &req)).await;
        let done = match outcome {
            Ok(Ok((allocation, simulation))) => JobRecord {
                status: JobStatus::Done,
                allocation: Some(allocation),
                simulation,
                ..rec
            },
            Ok(Err(e)) => JobRecord {
                status: JobStatus::Failed,
                error: Some(e.message),
                ..rec
            },
            Err(e) => JobRecord {
                status: JobStatus::Failed,
                error: Some(format!("job panicked: {e}")),
                ..rec
            },
        };
        log::info!("allocation job {} finished: {:?}", done.id, done.status);
        state.jobs.put(done);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(Submitted {
            id,
            status: JobStatus::Queued,
        }),
    ))
}

pub async fn status(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    s.jobs
        .get(&id)
        .map(|r| Json((*r).clone()))
        .ok_or_else(|| ApiError::not_found(format!("no allocation job `{id}`")))
}
