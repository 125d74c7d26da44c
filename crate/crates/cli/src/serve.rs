//! The prediction-serving endpoint: schedulers (or anything else) POST a
//! host id plus named feature values and get the guarded temperature
//! prediction back. Named fields rather than a positional vector, so a
//! misordered client cannot silently shift columns.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Json, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use serde_json::Value;

use rackheat::models::ModelBank;
use rackheat::sched::guarded_predict;
use rackheat::sim::GuardOutcome;

pub struct ServeState {
    pub bank: ModelBank,
    pub guard_margin_c: f64,
    pub guard_enabled: bool,
}

#[derive(Serialize)]
struct PredictResponse {
    host_id: String,
    prediction_c: f64,
    /// True when the guard replaced or clamped the raw model output.
    guard_flag: bool,
    guard_outcome: &'static str,
    model_kind: &'static str,
    model_version: u32,
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/hosts", get(list_hosts))
        .route("/predict", post(predict))
        .with_state(state)
}

async fn list_hosts(State(state): State<Arc<ServeState>>) -> Json<Value> {
    let hosts: Vec<&String> = state.bank.host_ids().collect();
    Json(serde_json::json!({ "hosts": hosts }))
}

async fn predict(State(state): State<Arc<ServeState>>, body: String) -> Response {
    let value: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")),
    };
    let Some(obj) = value.as_object() else {
        return error(StatusCode::BAD_REQUEST, "request body must be a JSON object");
    };
    let Some(host_id) = obj.get("host_id").and_then(Value::as_str) else {
        return error(StatusCode::BAD_REQUEST, "missing string field `host_id`");
    };
    let Some(features) = obj.get("features").and_then(Value::as_object) else {
        return error(StatusCode::BAD_REQUEST, "missing object field `features`");
    };

    let model = match state.bank.get(host_id) {
        Ok(m) => m,
        Err(_) => return error(StatusCode::NOT_FOUND, format!("unknown host `{host_id}`")),
    };

    let known: BTreeSet<&str> = model.feature_names.iter().map(String::as_str).collect();
    for key in features.keys() {
        if !known.contains(key.as_str()) {
            return error(StatusCode::BAD_REQUEST, format!("unexpected feature `{key}`"));
        }
    }
    let mut x = Vec::with_capacity(model.feature_names.len());
    for name in &model.feature_names {
        let Some(v) = features.get(name) else {
            return error(StatusCode::BAD_REQUEST, format!("missing feature `{name}`"));
        };
        let Some(v) = v.as_f64() else {
            return error(StatusCode::BAD_REQUEST, format!("feature `{name}` must be a number"));
        };
        if !v.is_finite() {
            return error(StatusCode::BAD_REQUEST, format!("feature `{name}` must be finite"));
        }
        x.push(v);
    }

    match guarded_predict(&state.bank, state.guard_margin_c, state.guard_enabled, host_id, &x) {
        Ok(guarded) => {
            let (flag, outcome) = match guarded.outcome {
                GuardOutcome::Clean => (false, "clean"),
                GuardOutcome::Disabled => (false, "disabled"),
                GuardOutcome::PeerAverage => (true, "peer_average"),
                GuardOutcome::CriticalClamped => (true, "critical_clamped"),
            };
            Json(PredictResponse {
                host_id: host_id.to_string(),
                prediction_c: guarded.temp_c,
                guard_flag: flag,
                guard_outcome: outcome,
                model_kind: model.model.name(),
                model_version: model.version,
            })
            .into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Bind and serve until the process is stopped. Returns the bound address
/// through the callback (useful with port 0).
pub async fn run(
    addr: SocketAddr,
    state: Arc<ServeState>,
    on_bound: impl FnOnce(SocketAddr),
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
