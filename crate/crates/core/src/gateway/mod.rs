//! HTTP gateway: routes, validation and the response envelope.
//!
//! Successful responses are `{"ok": true, "data": ...}`; failures are
//! `{"ok": false, "error": {"code", "message", "details"}}` with one code
//! from a closed set and a matching HTTP status.

mod auth;
mod dto;
mod envelope;
mod handlers;
mod validate;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, patch, post, put};
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use url::Url;

pub use auth::{Caller, MaybeCaller};
pub use envelope::{open_envelope, status_for, ApiError, ErrorBody};
pub use validate::{Fields, Valid, ValidQuery, Validate};

use crate::error::{Error, Result};
use crate::services::Lakehouse;

/// Body cap on metadata endpoints.
pub const METADATA_BODY_LIMIT: usize = 10 * 1024 * 1024;
/// Body cap on raw object uploads.
pub const OBJECT_BODY_LIMIT: usize = 1024 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    /// Bearer token optional.
    Optional,
    Bearer,
    /// Authorized by the ticket or grant id in the path.
    Capability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    pub access: Access,
}

const fn route(method: &'static str, path: &'static str, access: Access) -> Route {
    Route { method, path, access }
}

/// Every endpoint the gateway serves.
pub const ROUTES: &[Route] = &[
    route("GET", "/health", Access::Public),
    route("POST", "/auth/login", Access::Public),
    route("POST", "/users", Access::Optional),
    route("PATCH", "/users/{id}", Access::Bearer),
    route("DELETE", "/users/{id}", Access::Bearer),
    route("POST", "/users/{id}/password-reset", Access::Optional),
    route("GET", "/collections", Access::Bearer),
    route("POST", "/collections", Access::Bearer),
    route("GET", "/collections/{id}", Access::Bearer),
    route("GET", "/collections/{id}/files", Access::Bearer),
    route("GET", "/files/search", Access::Bearer),
    route("POST", "/files/search", Access::Bearer),
    route("POST", "/files/upload-request", Access::Bearer),
    route("POST", "/files/{id}/commit", Access::Bearer),
    route("GET", "/files/{id}/download-url", Access::Bearer),
    route("GET", "/buckets", Access::Bearer),
    route("POST", "/buckets", Access::Bearer),
    route("POST", "/credentials", Access::Bearer),
    route("POST", "/access-requests", Access::Bearer),
    route("GET", "/access-requests", Access::Bearer),
    route("POST", "/access-requests/{id}/decision", Access::Bearer),
    route("POST", "/visas/{id}/grants", Access::Bearer),
    route("DELETE", "/visas/{id}/grants/{user_id}", Access::Bearer),
    route("PUT", "/raw/{id}", Access::Capability),
    route("GET", "/raw/{id}", Access::Capability),
    route("POST", "/admin/janitor/sweep", Access::Bearer),
    route("POST", "/admin/janitor/reconcile", Access::Bearer),
];

async fn not_found() -> ApiError {
    ApiError(Error::not_found("route"))
}

async fn method_not_allowed() -> ApiError {
    ApiError(Error::invalid("method", "not allowed on this route"))
}

pub fn router(lake: Arc<Lakehouse>) -> Router {
    use handlers::*;
    let metadata = Router::new()
        .route("/health", get(health))
        .route("/auth/login", post(login))
        .route("/users", post(create_user))
        .route("/users/{id}", patch(update_user).delete(delete_user))
        .route("/users/{id}/password-reset", post(password_reset))
        .route("/collections", get(list_collections).post(create_collection))
        .route("/collections/{id}", get(show_collection))
        .route("/collections/{id}/files", get(list_files))
        .route("/files/search", get(basic_search).post(advanced_search))
        .route("/files/upload-request", post(upload_request))
        .route("/files/{id}/commit", post(commit_file))
        .route("/files/{id}/download-url", get(download_url))
        .route("/buckets", get(list_buckets).post(register_bucket))
        .route("/credentials", post(add_credential))
        .route("/access-requests", get(list_requests).post(submit_request))
        .route("/access-requests/{id}/decision", post(decide_request))
        .route("/visas/{id}/grants", post(grant_visa))
        .route("/visas/{id}/grants/{user_id}", delete(revoke_visa))
        .route("/admin/janitor/sweep", post(janitor_sweep))
        .route("/admin/janitor/reconcile", post(janitor_reconcile))
        .layer(DefaultBodyLimit::max(METADATA_BODY_LIMIT));
    let raw = Router::new()
        .route("/raw/{id}", put(raw_put).get(raw_get))
        .layer(DefaultBodyLimit::max(OBJECT_BODY_LIMIT));
    metadata
        .merge(raw)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(lake)
}

/// Serves `lake` on `listener` until `shutdown` resolves.
pub async fn serve(
    lake: Arc<Lakehouse>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, router(lake))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| Error::Internal(format!("server: {e}")))
}

/// A gateway running on a background task.
#[derive(Debug)]
pub struct RunningGateway {
    pub addr: SocketAddr,
    pub base_url: Url,
    pub lake: Arc<Lakehouse>,
    handle: JoinHandle<Result<()>>,
}

impl RunningGateway {
    pub fn stop(self) {
        self.handle.abort();
    }
}

/// Binds an ephemeral local port, builds the platform for that URL and
/// serves it in the background.
pub async fn spawn(build: impl FnOnce(Url) -> Result<Lakehouse>) -> Result<RunningGateway> {
    let listener = TcpListener::bind(("127.0.0.1", 0))
        .await
        .map_err(|e| Error::Internal(format!("bind: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Internal(format!("bind: {e}")))?;
    let base_url = Url::parse(&format!("http://{addr}/")).expect("socket address forms a valid url");
    let lake = Arc::new(build(base_url.clone())?);
    let handle = tokio::spawn(serve(lake.clone(), listener, std::future::pending()));
    Ok(RunningGateway {
        addr,
        base_url,
        lake,
        handle,
    })
}
