//! Drive the HTTP API in process: synthesize a layout, store it, edit it
//! with a version check, and generate a pair from it.
//!
//! ```bash
//! cargo run -p synclay-server --example api_client
//! ```

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use synclay::infer::Engine;
use synclay::nets::NetConfig;
use synclay::train::{save_bundle, BundleInfo, Models};
use synclay::Vocabulary;
use synclay_server::{router, AppState, LayoutStore};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (u16, Value) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ckpt = tempfile::tempdir()?;
    let models = Models::new(NetConfig::small(64), Vocabulary::conic(), 0)?;
    save_bundle(ckpt.path(), &models, &BundleInfo::default())?;
    let state = AppState::new(Some(Engine::load(ckpt.path())?), LayoutStore::in_memory());
    let app = router(Arc::new(state));

    let (_, health) = call(&app, "GET", "/api/v1/health", None).await;
    println!("health {health}");

    let params = json!({"grade": "low", "image_size": 64, "rng_seed": 4,
        "cellularities": {"epithelial": 0.7, "lymphocyte": 0.5}});
    let (_, layout) = call(&app, "POST", "/api/v1/layouts/synthesize", Some(params)).await;
    println!("synthesized {} cells", layout["cells"].as_array().map_or(0, Vec::len));

    let (status, stored) = call(&app, "POST", "/api/v1/layouts", Some(layout.clone())).await;
    let id = stored["id"].as_str().unwrap_or_default().to_string();
    println!("stored {id} v{} ({status})", stored["version"]);

    let mut edited = layout.clone();
    if let Some(cells) = edited["cells"].as_array_mut() {
        cells.push(json!({"type": "lymphocyte", "x": 0.5, "y": 0.5, "w": 7, "h": 7, "seed": 99}));
    }
    let url = format!("/api/v1/layouts/{id}");
    let (status, _) = call(&app, "PUT", &url, Some(json!({"layout": edited, "version": 1}))).await;
    println!("edit on v1: {status}");
    let (status, err) = call(&app, "PUT", &url, Some(json!({"layout": layout, "version": 1}))).await;
    println!("stale edit on v1: {status} {}", err["error"]["code"]);

    let (_, current) = call(&app, "GET", &url, None).await;
    let req = json!({"layout": current["layout"], "options": {"seed": 1}});
    let (status, pair) = call(&app, "POST", "/api/v1/generate", Some(req)).await;
    println!(
        "generate: {status}, {}x{}, image {} bytes of base64, provenance {}",
        pair["width"],
        pair["height"],
        pair["image_png"].as_str().map_or(0, str::len),
        pair["provenance"]
    );
    Ok(())
}
