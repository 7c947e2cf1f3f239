//! Cluster-based annotation of tissue-tile embeddings and histology-augmented
//! survival models.
//!
//! Two workflows share the same pieces:
//!
//! - **Annotation.** Cluster tile embeddings with mini-batch k-means
//!   ([`clusterer`]), review sampled tiles per cluster, label pure clusters
//!   and re-cluster mixed ones in an [`clusterer::AnnotationTree`], then
//!   export per-tile labels. [`serve`] exposes the tree over HTTP for a
//!   review UI. [`knn`] scores embeddings without training.
//! - **Survival.** Turn cluster assignments into per-patient fractions
//!   ([`cohort`]), select informative clusters, and compare a clinical Cox
//!   baseline with the cluster-augmented model over stratified splits
//!   ([`survival`], [`workflow`]).
//!
//! [`datastore`] reads and writes embeddings (EMB1 or CSV), manifests and
//! clinical tables. [`cli`] wires everything into the `histokit` binary.
//!
//! ```no_run
//! use histokit::clusterer::{assign, fit_minibatch_kmeans, KMeansParams};
//! use histokit::datastore::{align, load_embeddings, load_manifest};
//!
//! # fn main() -> histokit::Result<()> {
//! let data = align(load_embeddings("tiles.emb")?, load_manifest("manifest.csv")?)?;
//! let model = fit_minibatch_kmeans(data.embeddings(), &KMeansParams::new(32).seed(0))?;
//! let clusters = assign(&model, data.embeddings())?;
//! # let _ = clusters;
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod clusterer;
pub mod cohort;
pub mod config;
pub mod datastore;
pub mod error;
pub mod knn;
pub mod serve;
pub mod survival;
pub mod synthetic;
pub mod workflow;

pub use error::{Error, Result};
