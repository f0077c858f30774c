//! Cloud node: HTTP ingestion, persistence and query endpoints.
//!
//! | method | path                          | result                                   |
//! |--------|-------------------------------|------------------------------------------|
//! | POST   | `/events`                     | 201 `{event_id}`, 200 on duplicate, 400  |
//! | GET    | `/events?device=&label=&since=&until=&limit=` | time-ordered array       |
//! | GET    | `/events/{id}`                | one stored event or 404                  |
//! | GET    | `/stats`                      | per-label counts, rate, mean edge time   |
//! | PATCH  | `/events/{id}/validation`     | sets `human_validation`, 404 if unknown  |

mod store;

pub use store::{Insert, Query, Stats, Store, StoredEvent, ValidationAudit, DEFAULT_LIMIT, STORE_FILE};

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Path, Query as QueryParams, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use usv_core::clock::monotonic_ns;
use usv_core::event::CollisionEvent;
use usv_core::latency::{DelaySampler, LinkProfile};
use uuid::Uuid;

#[derive(Debug, Clone)]
pub struct CloudConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Truncated-Gaussian hold applied to every response.
    pub inject: Option<LinkProfile>,
    pub inject_seed: u64,
}

impl CloudConfig {
    pub fn new(listen: impl Into<String>, data_dir: impl Into<PathBuf>) -> Self {
        Self { listen: listen.into(), data_dir: data_dir.into(), inject: None, inject_seed: 0 }
    }
}

struct App {
    store: Mutex<Store>,
    delay: Option<Mutex<DelaySampler>>,
}

type Shared = Arc<App>;

fn error(status: StatusCode, msg: impl Into<String>, field: Option<&str>) -> Response {
    (status, Json(json!({ "error": msg.into(), "field": field }))).into_response()
}

/// Name of the field a deserialization error refers to.
fn field_of(path: &str, msg: &str) -> String {
    if path != "." && !path.is_empty() {
        return path.to_string();
    }
    msg.split('`').nth(1).unwrap_or("body").to_string()
}

async fn post_event(State(app): State<Shared>, ConnectInfo(peer): ConnectInfo<SocketAddr>, body: Bytes) -> Response {
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let event: CollisionEvent = match serde_path_to_error::deserialize(de) {
        Ok(e) => e,
        Err(e) => {
            let msg = e.inner().to_string();
            let field = field_of(&e.path().to_string(), &msg);
            return error(StatusCode::BAD_REQUEST, format!("{field}: {msg}"), Some(&field));
        }
    };
    if let Err(e) = event.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string(), Some(e.field));
    }
    let id = event.event_id;
    let stored = StoredEvent { event, t_received_ns: monotonic_ns(), source: peer.to_string(), validation_audit: vec![] };
    let result = app.store.lock().unwrap().insert(stored);
    match result {
        Ok(Insert::Created) => (StatusCode::CREATED, Json(json!({ "event_id": id }))).into_response(),
        Ok(Insert::Duplicate) => (StatusCode::OK, Json(json!({ "event_id": id, "duplicate": true }))).into_response(),
        Err(e) => error(StatusCode::SERVICE_UNAVAILABLE, format!("storage failure: {e}"), None),
    }
}

fn parse_query(params: &HashMap<String, String>) -> Result<Query, (String, String)> {
    let mut q = Query { limit: DEFAULT_LIMIT, ..Default::default() };
    for (k, v) in params {
        let bad = |e: &dyn std::fmt::Display| (k.clone(), format!("{k}: {e}"));
        match k.as_str() {
            "device" => q.device = Some(v.parse().map_err(|e| bad(&e))?),
            "label" => q.label = Some(v.parse().map_err(|e| bad(&e))?),
            "since" => q.since = Some(v.parse().map_err(|e| bad(&e))?),
            "until" => q.until = Some(v.parse().map_err(|e| bad(&e))?),
            "limit" => q.limit = v.parse().map_err(|e| bad(&e))?,
            _ => return Err((k.clone(), format!("unknown parameter {k}"))),
        }
    }
    Ok(q)
}

async fn list_events(State(app): State<Shared>, QueryParams(params): QueryParams<HashMap<String, String>>) -> Response {
    let q = match parse_query(&params) {
        Ok(q) => q,
        Err((field, msg)) => return error(StatusCode::BAD_REQUEST, msg, Some(&field)),
    };
    let store = app.store.lock().unwrap();
    Json(store.query(&q)).into_response()
}

async fn get_event(State(app): State<Shared>, Path(id): Path<String>) -> Response {
    let store = app.store.lock().unwrap();
    match Uuid::parse_str(&id).ok().and_then(|id| store.get(&id)) {
        Some(e) => Json(e).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no event {id}"), None),
    }
}

async fn stats(State(app): State<Shared>) -> Response {
    Json(app.store.lock().unwrap().stats(monotonic_ns())).into_response()
}

#[derive(Deserialize)]
struct ValidationBody {
    human_validation: String,
}

async fn patch_validation(State(app): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let body: ValidationBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string(), Some("human_validation")),
    };
    let Ok(uuid) = Uuid::parse_str(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no event {id}"), None);
    };
    let mut store = app.store.lock().unwrap();
    match store.validate(&uuid, body.human_validation, monotonic_ns()) {
        Ok(Some(e)) => Json(e).into_response(),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("no event {id}"), None),
        Err(e) => error(StatusCode::SERVICE_UNAVAILABLE, format!("storage failure: {e}"), None),
    }
}

async fn hold(State(app): State<Shared>, req: Request, next: Next) -> Response {
    let resp = next.run(req).await;
    if let Some(s) = &app.delay {
        let d = s.lock().unwrap().sample();
        tokio::time::sleep(d).await;
    }
    resp
}

fn router(app: Shared) -> Router {
    Router::new()
        .route("/events", get(list_events).post(post_event))
        .route("/events/{id}", get(get_event))
        .route("/events/{id}/validation", patch(patch_validation))
        .route("/stats", get(stats))
        .layer(middleware::from_fn_with_state(app.clone(), hold))
        .with_state(app)
}

pub struct CloudHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl CloudHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops the server and waits for in-flight requests.
    pub fn shutdown(mut self) -> io::Result<()> {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        self.thread.take().map_or(Ok(()), |t| t.join().unwrap_or_else(|_| Err(io::Error::other("cloud thread panicked"))))
    }

    /// Blocks until the server exits on its own.
    pub fn wait(mut self) -> io::Result<()> {
        self.thread.take().map_or(Ok(()), |t| t.join().unwrap_or_else(|_| Err(io::Error::other("cloud thread panicked"))))
    }
}

/// Opens the store, binds the listener and serves on a background runtime.
pub fn start_cloud(config: CloudConfig) -> io::Result<CloudHandle> {
    if let Some(p) = &config.inject {
        p.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    }
    let store = Store::open(&config.data_dir)?;
    let listener = std::net::TcpListener::bind(&config.listen)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let app = Arc::new(App {
        store: Mutex::new(store),
        delay: config.inject.filter(|p| !p.is_zero()).map(|p| Mutex::new(DelaySampler::new(p, config.inject_seed))),
    });
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = thread::Builder::new().name("cloud".into()).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            axum::serve(listener, router(app).into_make_service_with_connect_info::<SocketAddr>())
                .with_graceful_shutdown(async move {
                    let _ = rx.await;
                })
                .await
        })
    })?;
    Ok(CloudHandle { addr, stop: Some(tx), thread: Some(thread) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_from_serde_errors() {
        assert_eq!(field_of(".", "missing field `probs` at line 1 column 20"), "probs");
        assert_eq!(field_of("device_id", "invalid type"), "device_id");
        assert_eq!(field_of(".", "EOF while parsing"), "body");
    }
}
