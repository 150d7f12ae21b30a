//! HTTP front door: `POST /invoke`, `POST /query`, `POST /admin/{action}`.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use fscf_core::gateway::{ApiResponse, Gateway, REQ_ID_HEADER};

pub type SharedGateway = Arc<Mutex<Gateway>>;

/// How often the background task fires batch timeouts.
pub const TICK_INTERVAL: Duration = Duration::from_millis(100);

fn respond(r: ApiResponse) -> Response {
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut response = (status, Json(r.body)).into_response();
    if let Ok(v) = HeaderValue::from_str(&r.req_id) {
        response.headers_mut().insert(REQ_ID_HEADER, v);
    }
    response
}

fn req_id(headers: &HeaderMap) -> Option<String> {
    headers.get(REQ_ID_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string)
}

fn route(gw: &SharedGateway, path: &str, headers: &HeaderMap, body: &[u8]) -> Response {
    let mut gw = gw.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    respond(gw.route(path, body, req_id(headers)))
}

async fn invoke(State(gw): State<SharedGateway>, headers: HeaderMap, body: Bytes) -> Response {
    route(&gw, "/invoke", &headers, &body)
}

async fn query(State(gw): State<SharedGateway>, headers: HeaderMap, body: Bytes) -> Response {
    route(&gw, "/query", &headers, &body)
}

async fn admin(
    State(gw): State<SharedGateway>,
    Path(action): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    route(&gw, &format!("/admin/{action}"), &headers, &body)
}

async fn fallback(State(gw): State<SharedGateway>, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    route(&gw, uri.path(), &headers, &body)
}

/// The router. Oversized bodies reach the gateway, which answers 400.
pub fn app(gw: SharedGateway) -> Router {
    Router::new()
        .route("/invoke", post(invoke))
        .route("/query", post(query))
        .route("/admin/{action}", post(admin))
        .fallback(fallback)
        .layer(DefaultBodyLimit::disable())
        .with_state(gw)
}

/// Serves until the listener fails, cutting timed-out batches in the
/// background.
pub async fn serve(gw: SharedGateway, listen: &str) -> anyhow::Result<()> {
    let ticker = gw.clone();
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(TICK_INTERVAL);
        loop {
            interval.tick().await;
            ticker.lock().unwrap_or_else(|poisoned| poisoned.into_inner()).tick();
        }
    });
    let listener = tokio::net::TcpListener::bind(listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(gw)).await?;
    Ok(())
}
