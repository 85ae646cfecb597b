#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use synclay::infer::Engine;
use synclay::nets::NetConfig;
use synclay::train::{save_bundle, BundleInfo, Models};
use synclay::Vocabulary;
use synclay_server::{router, AppState, LayoutStore};
use tower::ServiceExt;

pub const SIZE: u32 = 64;

/// Writes an untrained 64 x 64 bundle.
pub fn write_checkpoint(dir: &Path, seed: u64) {
    let models = Models::new(NetConfig::small(SIZE as usize), Vocabulary::conic(), seed).unwrap();
    save_bundle(dir, &models, &BundleInfo::default()).unwrap();
}

pub fn app(engine: Option<Engine>) -> (Router, Arc<AppState>) {
    let state = Arc::new(AppState::new(engine, LayoutStore::in_memory()));
    (router(state.clone()), state)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

pub fn conic_types() -> Value {
    json!(["neutrophil", "epithelial", "lymphocyte", "plasma", "eosinophil", "connective"])
}

pub fn layout(cells: Value) -> Value {
    json!({"version": 1, "canvas": {"width": SIZE, "height": SIZE}, "types": conic_types(), "cells": cells})
}

pub fn one_cell() -> Value {
    layout(json!([{"type": "epithelial", "x": 0.3, "y": 0.4, "w": 10, "h": 8, "seed": 5}]))
}
