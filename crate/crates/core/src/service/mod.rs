//! HTTP facade under `/api/v1`, with optional static assets at the root.

mod handlers;
pub mod session;
pub mod wire;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tower_http::services::ServeDir;

use crate::dataset::Dataset;
use crate::error::Error;

pub use session::{Session, SessionConfig, SessionStore};

pub struct AppState {
    pub dataset: Arc<Dataset>,
    pub sessions: SessionStore,
}

impl AppState {
    pub fn new(dataset: Dataset, sessions: SessionStore) -> Self {
        Self {
            dataset: Arc::new(dataset),
            sessions,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = wire::ErrorBody {
            error: self.code,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/v1/session", get(handlers::session))
        .route("/api/v1/matrix", get(handlers::matrix))
        .route("/api/v1/cell", get(handlers::cell))
        .route("/api/v1/selection", post(handlers::create_selection))
        .route("/api/v1/selection/{id}", get(handlers::get_selection))
        .route("/api/v1/features", get(handlers::features))
        .route("/api/v1/divergence", get(handlers::divergence))
        .route("/api/v1/complementarity", get(handlers::complementarity))
        .route("/api/v1/encoders", post(handlers::encoders))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr, static_dir: Option<&Path>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await?;
    Ok(())
}
