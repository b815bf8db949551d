#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use recourse_cli::registry::Registry;
use recourse_cli::service::{router, AppState};
use recourse_cli::store::SessionStore;
use serde_json::Value;
use tower::ServiceExt;

pub fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

/// Service state over toy2 and synthetic with no trained artifacts.
pub fn state(dir: &Path, seed: u64) -> Arc<AppState> {
    let registry = Registry::load(&[config("toy2"), config("synthetic")], &dir.join("artifacts")).unwrap();
    let store = SessionStore::open(&dir.join("sessions.redb")).unwrap();
    Arc::new(AppState::new(registry, store, Some(seed)))
}

pub fn app(state: Arc<AppState>) -> Router {
    router(state, None)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

/// Fails if any object key anywhere in `v` names weights or particles.
pub fn assert_no_private_keys(v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let lower = k.to_lowercase();
                assert!(
                    !lower.contains("weight") && !lower.contains("particle") && lower != "w_hat",
                    "payload leaks key `{k}`"
                );
                assert_no_private_keys(inner);
            }
        }
        Value::Array(items) => items.iter().for_each(assert_no_private_keys),
        _ => {}
    }
}
