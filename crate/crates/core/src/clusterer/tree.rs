//! Hierarchical annotation of tile clusters.
//!
//! The root holds every tile row. Splitting a node runs k-means on its members
//! and attaches one child per non-empty cluster. Labels are attached to nodes;
//! a labeled node never has a labeled ancestor or descendant, so every tile
//! inherits at most one label.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{assign, fit_minibatch_kmeans, ClusterModel, KMeansParams};
use super::purity::cluster_purity;
use crate::datastore::{EmbeddingMatrix, TileManifest};
use crate::error::{Error, Result};

pub type NodeId = u64;

pub const ROOT: NodeId = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationNode {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    /// Cluster index inside the parent's sub-model.
    pub cluster_index: Option<usize>,
    pub children: Vec<NodeId>,
    /// Sorted tile row indices.
    pub member_rows: Vec<usize>,
    pub sub_model: Option<ClusterModel>,
    pub label: Option<String>,
    pub purity: Option<f64>,
    pub majority_label: Option<String>,
}

impl AnnotationNode {
    pub fn size(&self) -> usize {
        self.member_rows.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditAction {
    Label { label: String, previous: Option<String> },
    Unlabel { previous: String },
    Split { k: usize, seed: u64, children: Vec<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub node_id: NodeId,
    pub actor: String,
    pub action: AuditAction,
}

/// One exported tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub row: usize,
    pub label: Option<String>,
    /// Labeled node covering the tile, or the deepest node holding it.
    pub node_id: NodeId,
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTree {
    pub version: u64,
    pub n_rows: usize,
    next_id: NodeId,
    nodes: BTreeMap<NodeId, AnnotationNode>,
    pub audit: Vec<AuditEntry>,
    /// Mini-batch settings reused for splits.
    #[serde(default)]
    pub split_params: SplitParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub batch_size: usize,
    pub max_iters: usize,
    /// Rows were L2-normalized before clustering.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for SplitParams {
    fn default() -> Self {
        let d = KMeansParams::default();
        Self {
            batch_size: d.batch_size,
            max_iters: d.max_iters,
            normalize: false,
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl AnnotationTree {
    /// Tree with a single root holding rows `0..n_rows`.
    pub fn new(n_rows: usize) -> Self {
        let root = AnnotationNode {
            node_id: ROOT,
            parent_id: None,
            cluster_index: None,
            children: vec![],
            member_rows: (0..n_rows).collect(),
            sub_model: None,
            label: None,
            purity: None,
            majority_label: None,
        };
        Self {
            version: 0,
            n_rows,
            next_id: 1,
            nodes: BTreeMap::from([(ROOT, root)]),
            audit: vec![],
            split_params: SplitParams::default(),
        }
    }

    /// Root whose children are the clusters of an existing clustering.
    pub fn from_clustering(model: ClusterModel, assignments: &[usize]) -> Self {
        let mut tree = Self::new(assignments.len());
        let children = tree.attach_children(ROOT, &model, assignments.iter().copied().enumerate());
        let root = tree.nodes.get_mut(&ROOT).unwrap();
        root.children = children;
        root.sub_model = Some(model);
        tree
    }

    fn attach_children(
        &mut self,
        parent: NodeId,
        model: &ClusterModel,
        members: impl Iterator<Item = (usize, usize)>,
    ) -> Vec<NodeId> {
        let mut groups = vec![Vec::new(); model.k];
        for (row, c) in members {
            groups[c].push(row);
        }
        let mut ids = Vec::new();
        for (c, mut rows) in groups.into_iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            rows.sort_unstable();
            let id = self.next_id;
            self.next_id += 1;
            self.nodes.insert(
                id,
                AnnotationNode {
                    node_id: id,
                    parent_id: Some(parent),
                    cluster_index: Some(c),
                    children: vec![],
                    member_rows: rows,
                    sub_model: None,
                    label: None,
                    purity: None,
                    majority_label: None,
                },
            );
            ids.push(id);
        }
        ids
    }

    pub fn node(&self, id: NodeId) -> Result<&AnnotationNode> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn root(&self) -> &AnnotationNode {
        &self.nodes[&ROOT]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AnnotationNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = &AnnotationNode> {
        let mut cur = self.nodes.get(&id).and_then(|n| n.parent_id);
        std::iter::from_fn(move || {
            let node = self.nodes.get(&cur?)?;
            cur = node.parent_id;
            Some(node)
        })
    }

    pub fn descendants(&self, id: NodeId) -> Vec<&AnnotationNode> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.nodes.get(&id).map(|n| n.children.clone()).unwrap_or_default();
        while let Some(c) = stack.pop() {
            let n = &self.nodes[&c];
            stack.extend(n.children.iter().copied());
            out.push(n);
        }
        out
    }

    /// Errors with [`Error::Conflict`] unless the tree is at `expected`.
    pub fn check_version(&self, expected: u64) -> Result<()> {
        if expected != self.version {
            return Err(Error::Conflict {
                expected,
                current: self.version,
            });
        }
        Ok(())
    }

    fn record(&mut self, node_id: NodeId, actor: &str, action: AuditAction) {
        self.version += 1;
        self.audit.push(AuditEntry {
            seq: self.audit.len() as u64,
            timestamp_ms: now_ms(),
            node_id,
            actor: actor.to_string(),
            action,
        });
    }

    /// Re-clusters an unlabeled leaf into at most `k_child` children.
    pub fn split_node(
        &mut self,
        embeddings: &EmbeddingMatrix,
        node_id: NodeId,
        k_child: usize,
        seed: u64,
        actor: &str,
    ) -> Result<Vec<NodeId>> {
        if embeddings.n_rows() != self.n_rows {
            return Err(Error::RowCountMismatch {
                left: embeddings.n_rows(),
                right: self.n_rows,
            });
        }
        let node = self.node(node_id)?;
        let fail = |message: String| Err(Error::Tree { node: node_id, message });
        if node.label.is_some() {
            return fail("cannot split a labeled node".into());
        }
        if !node.is_leaf() {
            return fail("node has already been split".into());
        }
        if k_child == 0 || k_child > node.size() {
            return fail(format!("k={k_child} is not in 1..={} (member count)", node.size()));
        }
        let rows = node.member_rows.clone();
        let sub = embeddings.select_rows(&rows);
        let params = KMeansParams {
            k: k_child,
            seed,
            batch_size: self.split_params.batch_size,
            max_iters: self.split_params.max_iters,
            ..KMeansParams::default()
        };
        let model = fit_minibatch_kmeans(&sub, &params)?;
        let local = assign(&model, &sub)?;
        let children = self.attach_children(node_id, &model, rows.iter().copied().zip(local));
        let node = self.nodes.get_mut(&node_id).unwrap();
        node.children = children.clone();
        node.sub_model = Some(model);
        self.record(
            node_id,
            actor,
            AuditAction::Split {
                k: k_child,
                seed,
                children: children.clone(),
            },
        );
        Ok(children)
    }

    /// `min(m, size)` member rows drawn uniformly without replacement.
    pub fn sample_tiles(&self, node_id: NodeId, m: usize, seed: u64) -> Result<Vec<usize>> {
        let node = self.node(node_id)?;
        if m >= node.size() {
            return Ok(node.member_rows.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(rand::seq::index::sample(&mut rng, node.size(), m)
            .into_iter()
            .map(|i| node.member_rows[i])
            .collect())
    }

    pub fn label_node(&mut self, node_id: NodeId, label: &str, actor: &str) -> Result<()> {
        self.node(node_id)?;
        if label.trim().is_empty() {
            return Err(Error::Tree {
                node: node_id,
                message: "label must be non-empty".into(),
            });
        }
        if let Some(d) = self.descendants(node_id).into_iter().find(|d| d.label.is_some()) {
            return Err(Error::Tree {
                node: node_id,
                message: format!("descendant node {} is already labeled", d.node_id),
            });
        }
        if let Some(a) = self.ancestors(node_id).find(|a| a.label.is_some()) {
            return Err(Error::Tree {
                node: node_id,
                message: format!("ancestor node {} is already labeled", a.node_id),
            });
        }
        let node = self.nodes.get_mut(&node_id).unwrap();
        let previous = node.label.replace(label.to_string());
        self.record(
            node_id,
            actor,
            AuditAction::Label {
                label: label.to_string(),
                previous,
            },
        );
        Ok(())
    }

    pub fn unlabel_node(&mut self, node_id: NodeId, actor: &str) -> Result<()> {
        let node = self.nodes.get_mut(&node_id).ok_or(Error::UnknownNode(node_id))?;
        let previous = node.label.take().ok_or_else(|| Error::Tree {
            node: node_id,
            message: "node is not labeled".into(),
        })?;
        self.record(node_id, actor, AuditAction::Unlabel { previous });
        Ok(())
    }

    /// Fills `purity` and `majority_label` of every node from ground truth.
    pub fn compute_purity(&mut self, labels: &[Option<String>]) -> Result<()> {
        if labels.len() != self.n_rows {
            return Err(Error::RowCountMismatch {
                left: labels.len(),
                right: self.n_rows,
            });
        }
        for node in self.nodes.values_mut() {
            let sub: Vec<Option<String>> = node.member_rows.iter().map(|&r| labels[r].clone()).collect();
            let report = cluster_purity(&vec![0; sub.len()], &sub)?;
            let c = report.clusters.into_iter().next();
            node.purity = c.as_ref().and_then(|c| c.purity);
            node.majority_label = c.and_then(|c| c.majority_label);
        }
        Ok(())
    }

    /// Labeled nodes, plus unlabeled leaves that have no labeled ancestor.
    /// Together their member sets cover every row exactly once.
    pub fn frontier(&self) -> (Vec<NodeId>, Vec<NodeId>) {
        let mut labeled = Vec::new();
        let mut unlabeled = Vec::new();
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[&id];
            if n.label.is_some() {
                labeled.push(id);
            } else if n.is_leaf() {
                unlabeled.push(id);
            } else {
                stack.extend(n.children.iter().rev().copied());
            }
        }
        (labeled, unlabeled)
    }

    /// One row per tile, in row order.
    pub fn export_annotations(&self) -> Vec<AnnotationRow> {
        let mut out: Vec<AnnotationRow> = (0..self.n_rows)
            .map(|row| AnnotationRow {
                row,
                label: None,
                node_id: ROOT,
                purity: self.root().purity,
            })
            .collect();
        let (labeled, unlabeled) = self.frontier();
        for id in labeled.into_iter().chain(unlabeled) {
            let n = &self.nodes[&id];
            for &r in &n.member_rows {
                out[r] = AnnotationRow {
                    row: r,
                    label: n.label.clone(),
                    node_id: id,
                    purity: n.purity,
                };
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tree: Self = serde_json::from_str(s)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Checks structural invariants of a deserialized tree.
    pub fn validate(&self) -> Result<()> {
        let root = self.nodes.get(&ROOT).ok_or(Error::UnknownNode(ROOT))?;
        if root.member_rows.len() != self.n_rows {
            return Err(Error::Tree {
                node: ROOT,
                message: "root does not hold every row".into(),
            });
        }
        for n in self.nodes.values() {
            if n.children.is_empty() {
                continue;
            }
            let mut rows: Vec<usize> = Vec::with_capacity(n.size());
            for c in &n.children {
                let child = self.node(*c)?;
                if child.parent_id != Some(n.node_id) {
                    return Err(Error::Tree {
                        node: *c,
                        message: format!("parent link does not point at {}", n.node_id),
                    });
                }
                rows.extend(&child.member_rows);
            }
            rows.sort_unstable();
            if rows != n.member_rows {
                return Err(Error::Tree {
                    node: n.node_id,
                    message: "children do not partition the node's members".into(),
                });
            }
            if n.label.is_some() && self.descendants(n.node_id).iter().any(|d| d.label.is_some()) {
                return Err(Error::Tree {
                    node: n.node_id,
                    message: "labeled node has labeled descendants".into(),
                });
            }
        }
        Ok(())
    }

    /// Writes via a temp file and rename so readers never see a partial tree.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json()?;
        let tmp = path.with_extension("json.tmp");
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(json.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                // directory fsync makes the rename durable; not all platforms allow it
                if let Ok(d) = File::open(dir) {
                    let _ = d.sync_all();
                }
            }
            Ok(())
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Writes `tile_id,label,node_id,purity`.
pub fn write_annotations_csv(
    path: impl AsRef<Path>,
    rows: &[AnnotationRow],
    manifest: &TileManifest,
) -> Result<()> {
    let path = path.as_ref();
    if rows.len() != manifest.len() {
        return Err(Error::RowCountMismatch {
            left: rows.len(),
            right: manifest.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tile_id", "label", "node_id", "purity"])?;
    for r in rows {
        w.write_record([
            manifest.records()[r.row].tile_id.clone(),
            r.label.clone().unwrap_or_default(),
            r.node_id.to_string(),
            r.purity.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
