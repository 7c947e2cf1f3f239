//! Patient-level aggregation: cluster fractions, survival designs, cluster
//! selection and stratified resampling.

mod design;
mod fractions;
mod selection;
mod splits;

pub use design::{build_design_matrix, cluster_column, CovariateSet, DesignMatrix, Standardizer};
pub use fractions::{cluster_fractions, load_fractions_csv, write_fractions_csv, ClusterFractions};
pub use selection::{
    importance_fits, select_clusters, ClusterSelection, ImportanceFits, DEFAULT_IMPORTANCE_FITS, DEFAULT_SELECTED,
};
pub use splits::{stratified_splits, write_splits_csv, Split, SplitSpec};
