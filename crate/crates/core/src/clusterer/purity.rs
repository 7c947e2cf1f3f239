//! Label purity of clusters against ground-truth tile labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Purity threshold used for coverage summaries.
pub const DEFAULT_PURITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPurity {
    pub cluster: usize,
    pub size: usize,
    /// Members carrying a ground-truth label.
    pub labeled: usize,
    pub majority_label: Option<String>,
    /// Majority-label fraction among labeled members; absent when `labeled == 0`.
    pub purity: Option<f64>,
    pub label_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub clusters: Vec<ClusterPurity>,
    pub n_tiles: usize,
    pub n_labeled: usize,
    /// Non-empty clusters without a single labeled member.
    pub unlabeled_clusters: Vec<usize>,
}

impl PurityReport {
    fn qualifies(c: &ClusterPurity, tau: f64) -> bool {
        c.purity.is_some_and(|p| p >= tau)
    }

    /// Fraction of all tiles that sit in a cluster with purity `>= tau`.
    pub fn coverage(&self, tau: f64) -> f64 {
        if self.n_tiles == 0 {
            return 0.0;
        }
        let covered: usize = self
            .clusters
            .iter()
            .filter(|c| Self::qualifies(c, tau))
            .map(|c| c.size)
            .sum();
        covered as f64 / self.n_tiles as f64
    }

    /// Per label: fraction of tiles with that label sitting in a cluster with purity `>= tau`.
    pub fn coverage_by_label(&self, tau: f64) -> BTreeMap<String, f64> {
        let mut total = BTreeMap::<String, usize>::new();
        let mut covered = BTreeMap::<String, usize>::new();
        for c in &self.clusters {
            let q = Self::qualifies(c, tau);
            for (label, &count) in &c.label_counts {
                *total.entry(label.clone()).or_default() += count;
                if q {
                    *covered.entry(label.clone()).or_default() += count;
                }
            }
        }
        total
            .into_iter()
            .map(|(l, t)| {
                let c = covered.get(&l).copied().unwrap_or(0);
                (l, c as f64 / t as f64)
            })
            .collect()
    }
}

/// Purity of each cluster `0..=max(assignments)`.
pub fn cluster_purity(assignments: &[usize], labels: &[Option<String>]) -> Result<PurityReport> {
    if assignments.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} assignments but {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    let k = assignments.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    let mut counts = vec![BTreeMap::<String, usize>::new(); k];
    for (&c, label) in assignments.iter().zip(labels) {
        sizes[c] += 1;
        if let Some(l) = label {
            *counts[c].entry(l.clone()).or_default() += 1;
        }
    }
    let mut unlabeled_clusters = Vec::new();
    let clusters = counts
        .into_iter()
        .enumerate()
        .map(|(c, label_counts)| {
            let labeled: usize = label_counts.values().sum();
            // BTreeMap order makes ties resolve to the smallest label
            let majority = label_counts
                .iter()
                .fold(None::<(&String, usize)>, |best, (l, &n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ => Some((l, n)),
                });
            if labeled == 0 && sizes[c] > 0 {
                unlabeled_clusters.push(c);
            }
            ClusterPurity {
                cluster: c,
                size: sizes[c],
                labeled,
                majority_label: majority.map(|(l, _)| l.clone()),
                purity: majority.map(|(_, n)| n as f64 / labeled as f64),
                label_counts,
            }
        })
        .collect();
    Ok(PurityReport {
        clusters,
        n_tiles: assignments.len(),
        n_labeled: labels.iter().filter(|l| l.is_some()).count(),
        unlabeled_clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub k: usize,
    pub tau: f64,
    pub coverage: f64,
    /// Clusters whose purity reaches `tau`.
    pub pure_clusters: usize,
}

/// Coverage at `tau` for several clusterings of the same tiles.
pub fn purity_coverage_sweep(
    clusterings: &[(usize, Vec<usize>)],
    labels: &[Option<String>],
    tau: f64,
) -> Result<Vec<CoverageRow>> {
    clusterings
        .iter()
        .map(|(k, assignments)| {
            if assignments.len() != labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "clustering with k={k} covers {} tiles, labels cover {}",
                    assignments.len(),
                    labels.len()
                )));
            }
            let report = cluster_purity(assignments, labels)?;
            Ok(CoverageRow {
                k: *k,
                tau,
                coverage: report.coverage(tau),
                pure_clusters: report
                    .clusters
                    .iter()
                    .filter(|c| PurityReport::qualifies(c, tau))
                    .count(),
            })
        })
        .collect()
}
