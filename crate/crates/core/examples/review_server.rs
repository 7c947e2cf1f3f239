//! The review API behind the annotation UI, driven in-process: list
//! clusters, sample tiles, label one node, split another and export.
//!
//! Pass a bind address to keep serving afterwards:
//!
//! ```bash
//! cargo run --example review_server
//! cargo run --example review_server -- 127.0.0.1:8080
//! ```

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use histokit::clusterer::{assign, fit_minibatch_kmeans, AnnotationTree, KMeansParams};
use histokit::serve::{router, AppState};
use histokit::synthetic::{synthetic_cohort, CohortParams};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    println!("{method} {uri} -> {status}");
    serde_json::from_slice(&bytes).unwrap_or(Value::Null)
}

#[tokio::main]
async fn main() -> histokit::Result<()> {
    let cohort = synthetic_cohort(&CohortParams {
        n_patients: 40,
        tiles_per_patient: 25,
        ..CohortParams::default()
    })?;
    let model = fit_minibatch_kmeans(&cohort.embeddings, &KMeansParams::new(6).seed(0))?;
    let a = assign(&model, &cohort.embeddings)?;
    let tree = AnnotationTree::from_clustering(model, &a);
    let tree_path = std::env::temp_dir().join("histokit-review-tree.json");
    tree.save(&tree_path)?;

    let state = Arc::new(AppState::new(tree, tree_path.clone(), cohort.embeddings, cohort.manifest, None, 8)?);
    let app = router(Arc::clone(&state));

    let clusters = call(&app, "GET", "/api/clusters", None).await;
    let frontier: Vec<u64> = serde_json::from_value(clusters["frontier"].clone()).unwrap();
    for node in clusters["nodes"].as_array().unwrap() {
        println!("  node {} size {} purity {}", node["node_id"], node["size"], node["purity"]);
    }

    let samples = call(&app, "GET", &format!("/api/clusters/{}/samples?m=4", frontier[0]), None).await;
    println!("  {}", samples["tiles"]);
    let version = clusters["version"].as_u64().unwrap();
    let labeled = call(
        &app,
        "POST",
        &format!("/api/clusters/{}/label", frontier[0]),
        Some(json!({"label": "tumor", "expected_version": version})),
    )
    .await;
    println!("  {labeled}");
    let split = call(&app, "POST", &format!("/api/clusters/{}/split", frontier[1]), Some(json!({"k": 3}))).await;
    println!("  children {}", split["children"]);
    // a stale version is refused
    let stale = call(
        &app,
        "POST",
        &format!("/api/clusters/{}/label", frontier[2]),
        Some(json!({"label": "x", "expected_version": version})),
    )
    .await;
    println!("  {stale}");

    let export = call(&app, "GET", "/api/export", None).await;
    let rows = export.as_array().unwrap();
    let tumor = rows.iter().filter(|r| r["label"] == "tumor").count();
    println!("  {tumor} of {} tiles exported as tumor; tree at {}", rows.len(), tree_path.display());

    if let Some(bind) = std::env::args().nth(1) {
        println!("serving on http://{bind}");
        histokit::serve::serve(state, &bind).await?;
    }
    Ok(())
}
