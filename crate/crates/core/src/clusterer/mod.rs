//! Mini-batch k-means over embedding rows, cluster purity, and the
//! inspect / split / label annotation tree.

mod kmeans;
mod purity;
mod tree;

pub use kmeans::{
    adjusted_rand_index, assign, fit_minibatch_kmeans, init_candidates, kmeans_plus_plus, Checkpoint, ClusterModel,
    KMeansParams, DEFAULT_ANNOTATION_K, DEFAULT_BATCH_SIZE, DEFAULT_COHORT_K, DEFAULT_MAX_ITERS,
};
pub use purity::{
    cluster_purity, purity_coverage_sweep, ClusterPurity, CoverageRow, PurityReport, DEFAULT_PURITY_THRESHOLD,
};
pub use tree::{
    write_annotations_csv, AnnotationNode, AnnotationRow, AnnotationTree, AuditAction, AuditEntry, NodeId,
    SplitParams, ROOT,
};
