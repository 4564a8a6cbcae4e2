//! HTTP API for the interactive labeling loop.
//!
//! Each run lives in `<root>/runs/<id>/` with a copy of its dataset and a
//! `state.json` rewritten after every mutation, so a restarted service
//! resumes at the same pending batch.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use al_lab_core::data::{gen_blobs, load_dataset, save_dataset, BlobParams};
use al_lab_core::engine::{
    EngineError, LabelSubmission, Progress, QueryBatch, SubmitOutcome,
};
use al_lab_core::{ActiveLearningRun, AlConfig, Dataset, OracleToken};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

const STATE_FILE: &str = "state.json";
const DATASET_FILE: &str = "dataset.csv";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn unknown_run(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown run {id}"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Submission(_) | EngineError::Config(_) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::NoPendingBatch => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

struct RunEntry {
    dir: PathBuf,
    dataset: Arc<Dataset>,
    /// Held for the whole of a mutation so writes to one run are serialized.
    state: Mutex<ActiveLearningRun>,
    /// Published copy for readers.
    snapshot: RwLock<Arc<ActiveLearningRun>>,
}

impl RunEntry {
    fn snapshot(&self) -> Arc<ActiveLearningRun> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, run: &ActiveLearningRun) -> Result<(), ApiError> {
        persist(&self.dir, run).map_err(|e| ApiError::internal(format!("persisting run: {e}")))?;
        *self.snapshot.write().expect("snapshot lock") = Arc::new(run.clone());
        Ok(())
    }
}

/// Shared service state: the persistence root and every known run.
#[derive(Clone)]
pub struct AppState {
    root: PathBuf,
    runs: Arc<RwLock<HashMap<String, Arc<RunEntry>>>>,
    next_id: Arc<std::sync::Mutex<u64>>,
}

fn runs_dir(root: &Path) -> PathBuf {
    root.join("runs")
}

fn persist(dir: &Path, run: &ActiveLearningRun) -> io::Result<()> {
    let tmp = dir.join(format!("{STATE_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_vec(run).map_err(io::Error::other)?)?;
    fs::rename(tmp, dir.join(STATE_FILE))
}

/// Trains until a batch is pending or the run is finished.
fn settle(run: &mut ActiveLearningRun, dataset: &Dataset) -> Result<(), EngineError> {
    let token = OracleToken::ground_truth();
    match run.advance(dataset, Some(&token))? {
        Progress::Query(_) | Progress::Finished => Ok(()),
    }
}

impl AppState {
    /// Opens `root`, reloading persisted runs.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(runs_dir(&root))?;
        let mut runs = HashMap::new();
        let mut next_id = 1;
        for entry in fs::read_dir(runs_dir(&root))? {
            let dir = entry?.path();
            let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
                continue;
            };
            if !dir.join(STATE_FILE).exists() {
                continue;
            }
            let bad = |e: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", dir.display()));
            let dataset = load_dataset(&dir.join(DATASET_FILE)).map_err(|e| bad(e.to_string()))?;
            let mut run: ActiveLearningRun =
                serde_json::from_slice(&fs::read(dir.join(STATE_FILE))?).map_err(|e| bad(e.to_string()))?;
            // A crash between accepting labels and training leaves neither.
            if run.pending().is_none() && !run.is_finished() {
                settle(&mut run, &dataset).map_err(|e| bad(e.to_string()))?;
                persist(&dir, &run)?;
            }
            if let Some(n) = id.strip_prefix("run-").and_then(|n| n.parse::<u64>().ok()) {
                next_id = next_id.max(n + 1);
            }
            runs.insert(
                id,
                Arc::new(RunEntry {
                    dir,
                    dataset: Arc::new(dataset),
                    snapshot: RwLock::new(Arc::new(run.clone())),
                    state: Mutex::new(run),
                }),
            );
        }
        Ok(Self {
            root,
            runs: Arc::new(RwLock::new(runs)),
            next_id: Arc::new(std::sync::Mutex::new(next_id)),
        })
    }

    fn entry(&self, id: &str) -> Result<Arc<RunEntry>, ApiError> {
        self.runs
            .read()
            .expect("runs lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_run(id))
    }

    fn allocate_id(&self) -> String {
        let mut next = self.next_id.lock().expect("id lock");
        let id = format!("run-{:04}", *next);
        *next += 1;
        id
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/runs", post(create_run))
        .route("/runs/{id}/pending", get(get_pending))
        .route("/runs/{id}/labels", post(submit_labels))
        .route("/runs/{id}/status", get(get_status))
        .route("/runs/{id}/metrics", get(get_metrics))
        .route("/runs/{id}/history", get(get_history))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, root: PathBuf) -> io::Result<()> {
    let state = AppState::open(&root)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("al-lab: serving on http://{} (data in {})", listener.local_addr()?, root.display());
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DatasetSource {
    /// Path to a dataset CSV on the server.
    Csv(PathBuf),
    /// Generated and standardized on the train split.
    Blobs(BlobParams),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRun {
    config: serde_json::Value,
    dataset: DatasetSource,
    /// Defaults to the first configured seed.
    #[serde(default)]
    seed: Option<u64>,
}

fn unprocessable(message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
}

async fn create_run(State(app): State<AppState>, body: String) -> Result<Response, ApiError> {
    let request: CreateRun = serde_json::from_str(&body).map_err(|e| unprocessable(e.to_string()))?;
    let config = AlConfig::from_json(&request.config.to_string())
        .map_err(|e| unprocessable(format!("config: at {}: {}", e.path, e.message)))?;
    let seed = request.seed.unwrap_or(config.seeds[0]);
    let id = app.allocate_id();
    let dir = runs_dir(&app.root).join(&id);

    let created = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let dataset = match request.dataset {
            DatasetSource::Csv(path) => load_dataset(&path)
                .map_err(|e| unprocessable(format!("dataset {}: {e}", path.display())))?,
            DatasetSource::Blobs(params) => gen_blobs(&params)
                .map_err(|e| unprocessable(format!("dataset: {e}")))?
                .normalize(),
        };
        let token = OracleToken::ground_truth();
        let mut run = ActiveLearningRun::new(config, &dataset, seed, &token)?;
        settle(&mut run, &dataset)?;
        fs::create_dir_all(&dir).map_err(|e| ApiError::internal(e.to_string()))?;
        save_dataset(&dataset, &dir.join(DATASET_FILE)).map_err(|e| ApiError::internal(e.to_string()))?;
        persist(&dir, &run).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok((dir, dataset, run))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    let (dir, dataset, run) = created;
    let body = status_body(&id, &run, &dataset);
    let entry = Arc::new(RunEntry {
        dir,
        dataset: Arc::new(dataset),
        snapshot: RwLock::new(Arc::new(run.clone())),
        state: Mutex::new(run),
    });
    app.runs.write().expect("runs lock").insert(id, entry);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Serialize)]
struct PendingBody<'a> {
    run_id: &'a str,
    #[serde(flatten)]
    batch: &'a QueryBatch,
}

async fn get_pending(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let entry = app.entry(&id)?;
    let run = entry.snapshot();
    match run.pending() {
        Some(batch) => Ok(Json(PendingBody { run_id: &id, batch }).into_response()),
        None => Err(ApiError::new(StatusCode::CONFLICT, format!("run {id} is finished; nothing pending"))),
    }
}

async fn submit_labels(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: String,
) -> Result<Response, ApiError> {
    let entry = app.entry(&id)?;
    let submission = LabelSubmission::from_json(&body)?;
    let mut guard = entry.state.lock().await;
    let mut run = guard.clone();
    let dataset = entry.dataset.clone();
    let (run, outcome) = tokio::task::spawn_blocking(move || -> Result<_, EngineError> {
        let outcome = run.submit(&submission, dataset.class_count())?;
        if outcome == SubmitOutcome::Accepted {
            settle(&mut run, &dataset)?;
        }
        Ok((run, outcome))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    if outcome == SubmitOutcome::Accepted {
        entry.publish(&run)?;
        *guard = run.clone();
    }
    let status = match outcome {
        SubmitOutcome::Accepted => "accepted",
        SubmitOutcome::AlreadyApplied => "already_applied",
    };
    Ok(Json(json!({
        "run_id": id,
        "result": status,
        "cycle": run.cycle(),
        "labeled_count": run.pool().labeled().len(),
        "finished": run.is_finished(),
    }))
    .into_response())
}

fn status_body(id: &str, run: &ActiveLearningRun, dataset: &Dataset) -> serde_json::Value {
    let budget = run.budget();
    json!({
        "run_id": id,
        "strategy": run.strategy(),
        "seed": run.seed(),
        "cycle": run.cycle(),
        "cycles": budget.cycles,
        "batch_size": budget.per_cycle,
        "labeled_count": run.pool().labeled().len(),
        "unlabeled_count": run.pool().unlabeled().len(),
        "class_count": dataset.class_count(),
        "dims": dataset.dims(),
        "state": if run.is_finished() { "finished" } else if run.pending().is_some() { "awaiting_labels" } else { "training" },
        "reports": run.reports().len(),
    })
}

async fn get_status(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let entry = app.entry(&id)?;
    Ok(Json(status_body(&id, &entry.snapshot(), &entry.dataset)).into_response())
}

async fn get_metrics(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let entry = app.entry(&id)?;
    Ok(Json(entry.snapshot().reports().to_vec()).into_response())
}

/// Prediction history of the latest cycle as CSV.
async fn get_history(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let entry = app.entry(&id)?;
    let run = entry.snapshot();
    let history = run
        .history()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no history recorded yet"))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], history.to_csv()).into_response())
}
