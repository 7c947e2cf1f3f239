//! HTTP review service over an annotation tree.
//!
//! Reads go through a shared lock. Mutations are serialized by a single
//! writer lock, applied to a copy of the tree, persisted atomically and only
//! then published and acknowledged, so a crash never loses an acknowledged
//! action and never leaves a partial tree on disk.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use crate::clusterer::{AnnotationRow, AnnotationTree, AuditEntry, NodeId};
use crate::datastore::{EmbeddingMatrix, TileManifest};
use crate::error::{Error, Result};

const INDEX_HTML: &str = include_str!("index.html");
const DEFAULT_ACTOR: &str = "reviewer";

pub struct AppState {
    tree: RwLock<AnnotationTree>,
    writer: Mutex<()>,
    tree_path: PathBuf,
    embeddings: Arc<EmbeddingMatrix>,
    manifest: Arc<TileManifest>,
    ground_truth: Option<Vec<Option<String>>>,
    tile_root: Option<PathBuf>,
    sample_size: usize,
}

impl AppState {
    /// Loads the tree from `tree_path` and checks it against the data.
    pub fn load(
        tree_path: impl Into<PathBuf>,
        embeddings: EmbeddingMatrix,
        manifest: TileManifest,
        tile_root: Option<PathBuf>,
        sample_size: usize,
    ) -> Result<Self> {
        let tree_path = tree_path.into();
        let tree = AnnotationTree::load(&tree_path)?;
        Self::new(tree, tree_path, embeddings, manifest, tile_root, sample_size)
    }

    pub fn new(
        mut tree: AnnotationTree,
        tree_path: PathBuf,
        embeddings: EmbeddingMatrix,
        manifest: TileManifest,
        tile_root: Option<PathBuf>,
        sample_size: usize,
    ) -> Result<Self> {
        if tree.n_rows != manifest.len() || embeddings.n_rows() != manifest.len() {
            return Err(Error::InvalidArgument(format!(
                "tree covers {} rows, embeddings {}, manifest {}",
                tree.n_rows,
                embeddings.n_rows(),
                manifest.len()
            )));
        }
        // splits must see the rows the tree was clustered on
        let embeddings = if tree.split_params.normalize { embeddings.l2_normalized() } else { embeddings };
        let labels = manifest.labels();
        let ground_truth = labels.iter().any(Option::is_some).then_some(labels);
        if let Some(gt) = &ground_truth {
            tree.compute_purity(gt)?;
        }
        Ok(Self {
            tree: RwLock::new(tree),
            writer: Mutex::new(()),
            tree_path,
            embeddings: Arc::new(embeddings),
            manifest: Arc::new(manifest),
            ground_truth,
            tile_root,
            sample_size,
        })
    }

    pub async fn snapshot(&self) -> AnnotationTree {
        self.tree.read().await.clone()
    }

    /// Applies `f` to a copy of the tree, persists it, then publishes it.
    async fn mutate<T, F>(self: &Arc<Self>, expected_version: Option<u64>, f: F) -> Result<(T, u64)>
    where
        T: Send + 'static,
        F: FnOnce(&mut AnnotationTree, &EmbeddingMatrix) -> Result<T> + Send + 'static,
    {
        let _guard = self.writer.lock().await;
        let mut draft = self.tree.read().await.clone();
        if let Some(v) = expected_version {
            draft.check_version(v)?;
        }
        let state = Arc::clone(self);
        let (out, draft) = tokio::task::spawn_blocking(move || -> Result<(T, AnnotationTree)> {
            let out = f(&mut draft, &state.embeddings)?;
            if let Some(gt) = &state.ground_truth {
                draft.compute_purity(gt)?;
            }
            draft.save(&state.tree_path)?;
            Ok((out, draft))
        })
        .await
        .map_err(|e| Error::Undefined(format!("mutation task failed: {e}")))??;
        let version = draft.version;
        *self.tree.write().await = draft;
        Ok((out, version))
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownNode(_) => StatusCode::NOT_FOUND,
            Error::Conflict { .. } => StatusCode::CONFLICT,
            Error::Tree { .. } | Error::InvalidArgument(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({ "error": self.0.to_string() });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub size: usize,
    pub label: Option<String>,
    pub purity: Option<f64>,
    pub majority_label: Option<String>,
    pub children: Vec<NodeId>,
    /// Unlabeled leaf with no labeled ancestor: can be labeled or split.
    pub actionable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersResponse {
    pub version: u64,
    pub n_rows: usize,
    pub nodes: Vec<NodeView>,
    /// Labeled nodes and actionable leaves, covering every tile once.
    pub frontier: Vec<NodeId>,
}

async fn list_clusters(State(s): State<Arc<AppState>>) -> Json<ClustersResponse> {
    let tree = s.tree.read().await;
    let (labeled, actionable) = tree.frontier();
    let nodes = tree
        .nodes()
        .map(|n| NodeView {
            node_id: n.node_id,
            parent_id: n.parent_id,
            size: n.size(),
            label: n.label.clone(),
            purity: n.purity,
            majority_label: n.majority_label.clone(),
            children: n.children.clone(),
            actionable: actionable.contains(&n.node_id),
        })
        .collect();
    let mut frontier = labeled;
    frontier.extend(actionable);
    Json(ClustersResponse {
        version: tree.version,
        n_rows: tree.n_rows,
        nodes,
        frontier,
    })
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    m: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTile {
    pub row: usize,
    pub tile_id: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesResponse {
    pub node_id: NodeId,
    pub size: usize,
    pub seed: u64,
    pub tiles: Vec<SampleTile>,
}

async fn samples(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<NodeId>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<Json<SamplesResponse>> {
    let tree = s.tree.read().await;
    let m = q.m.unwrap_or(s.sample_size);
    let seed = q.seed.unwrap_or(0);
    let rows = tree.sample_tiles(id, m, seed)?;
    let tiles = rows
        .into_iter()
        .map(|row| {
            let tile_id = s.manifest.records()[row].tile_id.clone();
            SampleTile {
                row,
                url: format!("/tiles/{}", url_escape(&tile_id)),
                tile_id,
            }
        })
        .collect();
    Ok(Json(SamplesResponse {
        node_id: id,
        size: tree.node(id)?.size(),
        seed,
        tiles,
    }))
}

fn url_escape(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct LabelRequest {
    /// New label, or `null` to remove the current one.
    pub label: Option<String>,
    pub actor: Option<String>,
    pub expected_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationResponse {
    pub node_id: NodeId,
    pub version: u64,
    pub children: Vec<NodeId>,
}

async fn label(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<NodeId>,
    Json(req): Json<LabelRequest>,
) -> ApiResult<Json<MutationResponse>> {
    let actor = req.actor.unwrap_or_else(|| DEFAULT_ACTOR.into());
    let ((), version) = s
        .mutate(req.expected_version, move |tree, _| match req.label {
            Some(l) => tree.label_node(id, &l, &actor),
            None => tree.unlabel_node(id, &actor),
        })
        .await?;
    Ok(Json(MutationResponse {
        node_id: id,
        version,
        children: vec![],
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct SplitRequest {
    pub k: usize,
    pub seed: Option<u64>,
    pub actor: Option<String>,
    pub expected_version: Option<u64>,
}

async fn split(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<NodeId>,
    Json(req): Json<SplitRequest>,
) -> ApiResult<Json<MutationResponse>> {
    let actor = req.actor.unwrap_or_else(|| DEFAULT_ACTOR.into());
    let seed = req.seed.unwrap_or(0);
    let (children, version) = s
        .mutate(req.expected_version, move |tree, emb| tree.split_node(emb, id, req.k, seed, &actor))
        .await?;
    Ok(Json(MutationResponse {
        node_id: id,
        version,
        children,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub tile_id: String,
    pub label: Option<String>,
    pub node_id: NodeId,
    pub purity: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

pub fn export_rows(rows: &[AnnotationRow], manifest: &TileManifest) -> Vec<ExportRow> {
    rows.iter()
        .map(|r| ExportRow {
            tile_id: manifest.records()[r.row].tile_id.clone(),
            label: r.label.clone(),
            node_id: r.node_id,
            purity: r.purity,
        })
        .collect()
}

async fn export(State(s): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let rows = export_rows(&s.tree.read().await.export_annotations(), &s.manifest);
    if q.format.as_deref() == Some("csv") {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tile_id", "label", "node_id", "purity"]).map_err(Error::from)?;
        for r in &rows {
            w.write_record([
                r.tile_id.clone(),
                r.label.clone().unwrap_or_default(),
                r.node_id.to_string(),
                r.purity.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(Error::from)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::Undefined(format!("csv buffer: {e}")))?;
        return Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response());
    }
    Ok(Json(rows).into_response())
}

async fn audit(State(s): State<Arc<AppState>>) -> Json<Vec<AuditEntry>> {
    Json(s.tree.read().await.audit.clone())
}

/// Resolves `image_path` under `root`, refusing anything that would escape it.
pub fn resolve_tile_path(root: &Path, image_path: &Path) -> Option<PathBuf> {
    let rel = if image_path.is_absolute() {
        image_path.strip_prefix(root).ok()?
    } else {
        image_path
    };
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = root.join(rel);
    let canon_root = root.canonicalize().ok()?;
    let canon = full.canonicalize().ok()?;
    canon.starts_with(&canon_root).then_some(canon)
}

fn placeholder_svg(tile_id: &str) -> String {
    let hash = tile_id.bytes().fold(0u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32));
    let hue = hash % 360;
    let text: String = tile_id
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        .take(24)
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"224\" height=\"224\" viewBox=\"0 0 224 224\">\
<defs><pattern id=\"p\" width=\"16\" height=\"16\" patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">\
<rect width=\"8\" height=\"16\" fill=\"hsl({hue},45%,82%)\"/></pattern></defs>\
<rect width=\"224\" height=\"224\" fill=\"hsl({hue},45%,92%)\"/><rect width=\"224\" height=\"224\" fill=\"url(#p)\"/>\
<text x=\"112\" y=\"116\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{text}</text></svg>"
    )
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        Some("tif" | "tiff") => "image/tiff",
        _ => "application/octet-stream",
    }
}

async fn tile(State(s): State<Arc<AppState>>, UrlPath(tile_id): UrlPath<String>) -> Response {
    let Some(row) = s.manifest.position(&tile_id) else {
        let body = serde_json::json!({ "error": format!("unknown tile `{tile_id}`") });
        return (StatusCode::NOT_FOUND, Json(body)).into_response();
    };
    let rec = &s.manifest.records()[row];
    let resolved = match (&s.tile_root, &rec.image_path) {
        (Some(root), Some(p)) => resolve_tile_path(root, p),
        _ => None,
    };
    if let Some(path) = resolved {
        if let Ok(bytes) = tokio::fs::read(&path).await {
            return ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response();
        }
    }
    ([(header::CONTENT_TYPE, "image/svg+xml")], placeholder_svg(&tile_id)).into_response()
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/clusters", get(list_clusters))
        .route("/api/clusters/{id}/samples", get(samples))
        .route("/api/clusters/{id}/label", post(label))
        .route("/api/clusters/{id}/split", post(split))
        .route("/api/export", get(export))
        .route("/api/audit", get(audit))
        .route("/tiles/{tile_id}", get(tile))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, bind: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| Error::io(PathBuf::from(bind), e))?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(PathBuf::from(bind), e))
}
