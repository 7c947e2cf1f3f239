//! Project configuration file (TOML).
//!
//! ```toml
//! [paths]
//! embeddings = "data/embeddings.emb"
//! manifest = "data/manifest.csv"
//! clinical = "data/clinical.csv"
//! tree = "out/tree.json"
//! output_dir = "out"
//!
//! [clustering]
//! k = 32
//! seed = 0
//!
//! [survival]
//! penalizer = 0.001
//! l1_ratio = 0.5
//! n_splits = 1000
//!
//! [serve]
//! bind = "127.0.0.1:8080"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Command-line flags override every value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clusterer::{DEFAULT_BATCH_SIZE, DEFAULT_COHORT_K, DEFAULT_MAX_ITERS};
use crate::cohort::CovariateSet;
use crate::error::{Error, Result};
use crate::survival::{DEFAULT_HORIZON, DEFAULT_L1_RATIO, DEFAULT_PENALIZER};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clinical: Option<PathBuf>,
    /// Annotation tree; written by `cluster`, read by `serve`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// L2-normalize rows before clustering.
    pub normalize: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_COHORT_K,
            batch_size: DEFAULT_BATCH_SIZE,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalConfig {
    pub penalizer: f64,
    pub l1_ratio: f64,
    pub horizon: f64,
    pub test_fraction: f64,
    pub n_splits: usize,
    pub seed: u64,
    pub covariates: Vec<CovariateSet>,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        Self {
            penalizer: DEFAULT_PENALIZER,
            l1_ratio: DEFAULT_L1_RATIO,
            horizon: DEFAULT_HORIZON,
            test_fraction: 0.25,
            n_splits: 1000,
            seed: 0,
            covariates: CovariateSet::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tile_root: Option<PathBuf>,
    /// Tiles shown per cluster card.
    pub sample_size: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            tile_root: None,
            sample_size: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub paths: PathsConfig,
    pub clustering: ClusteringConfig,
    pub survival: SurvivalConfig,
    pub serve: ServeConfig,
}

impl ProjectConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("cannot serialize config: {e}")))
    }

    /// Reads, resolves relative paths against the file's directory and checks
    /// that every input path exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::format(path, m),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.embeddings,
            &mut p.manifest,
            &mut p.clinical,
            &mut p.tree,
            &mut p.output_dir,
            &mut self.serve.tile_root,
        ] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
    }

    /// Input files and the tile root must exist; outputs need not.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        for (name, v) in [
            ("paths.embeddings", &p.embeddings),
            ("paths.manifest", &p.manifest),
            ("paths.clinical", &p.clinical),
            ("serve.tile_root", &self.serve.tile_root),
        ] {
            if let Some(path) = v {
                if !path.exists() {
                    return Err(Error::InvalidArgument(format!("{name} `{}` does not exist", path.display())));
                }
            }
        }
        if self.clustering.k == 0 {
            return Err(Error::InvalidArgument("clustering.k must be at least 1".into()));
        }
        if !(self.survival.test_fraction > 0.0 && self.survival.test_fraction < 1.0) {
            return Err(Error::InvalidArgument("survival.test_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}
