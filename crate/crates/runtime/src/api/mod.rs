//! The admin HTTP API: staged configuration CRUD, apply, users, status and
//! per-port stats. Every route is gated by the role matrix in `matrix`.

mod matrix;
mod objects;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{MatchedPath, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Extension, Json, Router};
use sdx_core::config::{diff_config, emit_config, fingerprint, parse_config, validate, ConfigError, FabricConfig, Violation};
use sdx_core::stats::{compute_rates, render_exposition, MetricStore, SeriesKey, CONTENT_TYPE, PORT_COUNTERS};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use matrix::{allowed, RouteRule, ROUTES};

use crate::controller::{ApplyError, Controller};
use crate::status::StatusBoard;
use crate::users::{User, UserDb, UserView};

pub const DEFAULT_ADMIN_PORT: u16 = 8080;
pub const DEFAULT_METRICS_PORT: u16 = 9302;

pub struct AppState {
    pub controller: Controller,
    pub store: Arc<RwLock<MetricStore>>,
    pub board: Arc<StatusBoard>,
    pub staged: Mutex<FabricConfig>,
    pub users: RwLock<UserDb>,
    pub users_path: Option<PathBuf>,
    pub rate_window_s: f64,
}

impl AppState {
    pub fn staged(&self) -> FabricConfig {
        self.staged.lock().unwrap().clone()
    }
}

pub type SharedState = Arc<AppState>;

#[derive(Debug, Clone, Serialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ApiErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ApiErrorBody {
                code: code.to_string(),
                message: message.into(),
                violations: Vec::new(),
            },
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn conflict(what: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", what)
    }

    pub fn unprocessable(what: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invariant", what)
    }

    /// Reference problems are integrity conflicts (409); anything else is
    /// an invariant violation (422).
    pub fn from_config(e: ConfigError) -> Self {
        let integrity = !e.violations.is_empty() && e.violations.iter().any(|v| v.kind.is_reference());
        let status = if integrity {
            StatusCode::CONFLICT
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError {
            status,
            body: ApiErrorBody {
                code: e.code.as_str().to_string(),
                message: e.to_string(),
                violations: e.violations,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.body }))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let v = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = v.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

async fn authorize(State(state): State<SharedState>, mut req: Request, next: Next) -> Response {
    let user = {
        let users = state.users.read().unwrap();
        bearer(req.headers()).and_then(|t| users.by_token(t)).cloned()
    };
    let Some(user) = user else {
        return ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", "missing or unknown bearer token").into_response();
    };
    let path = req
        .extensions()
        .get::<MatchedPath>()
        .map(|p| p.as_str().to_string())
        .unwrap_or_default();
    if allowed(user.role, req.method().as_str(), &path) != Some(true) {
        return ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            format!("role {} may not {} {}", user.role.as_str(), req.method(), path),
        )
        .into_response();
    }
    req.extensions_mut().insert(user);
    next.run(req).await
}

/// The admin API router, with authentication on every route.
pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/whoami", get(whoami))
        .route("/status", get(status))
        .route("/stats/ports", get(port_stats))
        .route("/config/yaml", get(get_yaml).put(put_yaml))
        .route("/config/diff", get(config_diff))
        .route("/config/apply", axum::routing::post(apply))
        .merge(objects::routes())
        .route_layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

/// The metrics router: unauthenticated, exposition format only.
pub fn metrics_router(state: SharedState) -> Router {
    Router::new().route("/metrics", get(metrics)).with_state(state)
}

async fn metrics(State(state): State<SharedState>) -> Response {
    let process = state.board.process();
    let text = {
        let store = state.store.read().unwrap();
        render_exposition(&store, Some(&process), state.rate_window_s)
    };
    ([(header::CONTENT_TYPE, CONTENT_TYPE)], text).into_response()
}

async fn whoami(Extension(user): Extension<User>) -> Json<UserView> {
    Json(UserView::from(&user))
}

async fn status(State(state): State<SharedState>) -> Response {
    Json(state.board.snapshot()).into_response()
}

#[derive(Debug, Deserialize)]
pub struct StatsQuery {
    pub dp: String,
    pub port: u32,
    pub window: Option<f64>,
}

async fn port_stats(
    State(state): State<SharedState>,
    Extension(user): Extension<User>,
    Query(q): Query<StatsQuery>,
) -> ApiResult<Response> {
    if user.role == crate::users::Role::Customer && !user.owns(&q.dp, q.port) {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            format!("{} does not own {}:{}", user.username, q.dp, q.port),
        ));
    }
    let window = q.window.unwrap_or(state.rate_window_s);
    if !(window > 0.0 && window.is_finite()) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "window must be a positive number of seconds"));
    }
    let active = state.controller.active();
    let known = active.dps.get(&q.dp).is_some_and(|d| d.interfaces.contains_key(&q.port));
    if !known {
        return Err(ApiError::not_found(format!("port {}:{} is not configured", q.dp, q.port)));
    }
    let store = state.store.read().unwrap();
    let Some(rates) = compute_rates(&store, &q.dp, q.port, window) else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let mut samples = serde_json::Map::new();
    for (name, _) in PORT_COUNTERS {
        if let Some(ring) = store.samples(&SeriesKey::port(name, &q.dp, q.port)) {
            let newest = ring.back().map(|s| s.t_ms).unwrap_or(0);
            let horizon = newest as f64 - window * 1000.0;
            let rows: Vec<_> = ring
                .iter()
                .filter(|s| s.t_ms as f64 >= horizon)
                .map(|s| json!([s.t_ms, s.value]))
                .collect();
            samples.insert(name.to_string(), rows.into());
        }
    }
    Ok(Json(json!({
        "dp": q.dp,
        "port": q.port,
        "window_seconds": window,
        "rates": rates,
        "samples": samples,
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    pub version: Option<String>,
}

async fn get_yaml(State(state): State<SharedState>, Query(q): Query<VersionQuery>) -> ApiResult<Response> {
    let cfg = match q.version.as_deref() {
        None | Some("staged") => state.staged(),
        Some("active") => (*state.controller.active()).clone(),
        Some(v) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("unknown version '{v}'"))),
    };
    let text = emit_config(&cfg).map_err(ApiError::from_config)?;
    Ok(([(header::CONTENT_TYPE, "application/yaml")], text).into_response())
}

async fn put_yaml(State(state): State<SharedState>, body: String) -> ApiResult<Json<serde_json::Value>> {
    let cfg = parse_config(&body).map_err(|e| {
        let mut err = ApiError::from_config(e);
        // a document that does not parse is never an integrity conflict
        err.status = StatusCode::UNPROCESSABLE_ENTITY;
        err
    })?;
    let fp = fingerprint(&cfg);
    *state.staged.lock().unwrap() = cfg;
    Ok(Json(json!({ "staged_fingerprint": fp })))
}

async fn config_diff(State(state): State<SharedState>) -> Json<serde_json::Value> {
    let staged = state.staged();
    let active = state.controller.active();
    let delta = diff_config(&active, &staged);
    Json(json!({
        "active_fingerprint": fingerprint(&active),
        "staged_fingerprint": fingerprint(&staged),
        "changes": delta.len(),
        "affected_datapaths": delta.affected_datapaths(),
        "delta": delta,
    }))
}

async fn apply(State(state): State<SharedState>) -> ApiResult<Response> {
    let staged = state.staged();
    let report = validate(&staged);
    if !report.is_valid() {
        let mut e = ApiError::from_config(ConfigError::from_report(report));
        e.status = StatusCode::UNPROCESSABLE_ENTITY;
        return Err(e);
    }
    match state.controller.apply_config(staged).await {
        Ok(report) => Ok(Json(report).into_response()),
        Err(ApplyError::Invalid(e)) => {
            let mut e = ApiError::from_config(e);
            e.status = StatusCode::UNPROCESSABLE_ENTITY;
            Err(e)
        }
        Err(ApplyError::Compile(e)) => Err(ApiError::unprocessable(e.to_string())),
        Err(ApplyError::PushFailed(report)) => {
            let body = json!({
                "error": ApiErrorBody {
                    code: "push_failed".into(),
                    message: format!("push failed on {}", report.failed.join(", ")),
                    violations: Vec::new(),
                },
                "report": report,
            });
            Ok((StatusCode::BAD_GATEWAY, Json(body)).into_response())
        }
    }
}
