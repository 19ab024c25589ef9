//! HTTP JSON API over a [`BatchStore`], plus the console's static files.
//!
//! | method | path | success | errors |
//! |---|---|---|---|
//! | GET | `/api/batches` | ids and status | |
//! | GET | `/api/batches/{id}` | the batch | 404 |
//! | POST | `/api/batches/{id}/curation` | the curated batch | 404, 409, 422 |
//! | GET | `/api/batches/{id}/export` | the quiz | 404, 409 |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use quizsmith::curation::CurationResult;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::store::{BatchStore, StoreError};
use crate::ServeArgs;

impl IntoResponse for StoreError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": self.to_string() })),
            StoreError::AlreadyCurated(_) | StoreError::NotCurated(_) | StoreError::Exists(_) => {
                (StatusCode::CONFLICT, json!({ "error": self.to_string() }))
            }
            StoreError::Invalid(violations) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "curation rejected", "violations": violations }),
            ),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": self.to_string() })),
        };
        (status, Json(body)).into_response()
    }
}

async fn blocking<T, F>(store: Arc<BatchStore>, f: F) -> Result<Json<T>, StoreError>
where
    T: Send + 'static,
    F: FnOnce(&BatchStore) -> Result<T, StoreError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| StoreError::Io(e.to_string()))?
        .map(Json)
}

async fn list(State(store): State<Arc<BatchStore>>) -> impl IntoResponse {
    blocking(store, |s| s.list()).await
}

async fn show(State(store): State<Arc<BatchStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(store, move |s| s.get(&id)).await
}

async fn submit(
    State(store): State<Arc<BatchStore>>,
    Path(id): Path<String>,
    Json(result): Json<CurationResult>,
) -> impl IntoResponse {
    blocking(store, move |s| s.submit(&id, result)).await
}

async fn export(State(store): State<Arc<BatchStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(store, move |s| s.export(&id)).await
}

/// The API routes, with `ui_dir` served for every other path when given.
pub fn router(store: Arc<BatchStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/batches", get(list))
        .route("/api/batches/{id}", get(show))
        .route("/api/batches/{id}/curation", post(submit))
        .route("/api/batches/{id}/export", get(export))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub fn run(args: ServeArgs) -> anyhow::Result<()> {
    let dir = args.data.resolve();
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", args.host, args.port))?;
    let app = router(Arc::new(BatchStore::new(dir)), args.ui_dir);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
