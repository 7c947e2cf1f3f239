use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, Standardizer};
use super::splits::{stratified_splits, SplitSpec};
use crate::error::{Error, Result};
use crate::survival::{fit_coxph, CoxData, CoxOptions};

pub const DEFAULT_SELECTED: usize = 6;
pub const DEFAULT_IMPORTANCE_FITS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSelection {
    /// Chosen clusters, most important first.
    pub indices: Vec<usize>,
    /// Mean absolute standardized coefficient of every cluster.
    pub importance: Vec<f64>,
    /// Every coefficient was zero; the selection is just the lowest indices.
    pub degenerate: bool,
}

/// Ranks clusters by mean absolute coefficient across fits; ties go to the
/// lower cluster index.
pub fn select_clusters(coefficients: &[Vec<f64>], m: usize) -> Result<ClusterSelection> {
    let k = coefficients
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("no fit results to select from".into()))?;
    if let Some(c) = coefficients.iter().find(|c| c.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: c.len(),
        });
    }
    if m > k {
        return Err(Error::InvalidArgument(format!("cannot select {m} of {k} clusters")));
    }
    let runs = coefficients.len() as f64;
    let importance: Vec<f64> = (0..k)
        .map(|j| coefficients.iter().map(|c| c[j].abs()).sum::<f64>() / runs)
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order.truncate(m);
    Ok(ClusterSelection {
        indices: order,
        degenerate: importance.iter().all(|&v| v == 0.0),
        importance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFits {
    /// Standardized coefficients of each successful fit.
    pub coefficients: Vec<Vec<f64>>,
    pub failed: usize,
    pub seed: u64,
}

/// Fits the elastic-net Cox model on the training half of `spec.n_splits`
/// stratified resamples of a fractions-only design, standardizing each
/// resample with its own statistics.
pub fn importance_fits(design: &DesignMatrix, spec: &SplitSpec, opts: &CoxOptions) -> Result<ImportanceFits> {
    let splits = stratified_splits(&design.events, spec)?;
    let fits: Vec<Option<Vec<f64>>> = splits
        .par_iter()
        .map(|s| {
            let train = Standardizer::fit(design, &s.train).apply(&design.subset(&s.train));
            let data = CoxData::new(&train.values, train.p(), &train.durations, &train.events).ok()?;
            fit_coxph(&data, opts).ok().map(|m| m.coefficients)
        })
        .collect();
    let failed = fits.iter().filter(|f| f.is_none()).count();
    let coefficients: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    if coefficients.is_empty() {
        return Err(Error::InvalidArgument(format!("all {failed} importance fits failed")));
    }
    Ok(ImportanceFits {
        coefficients,
        failed,
        seed: spec.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_and_ties() {
        let fits = vec![vec![0.1, -0.5, 0.0, 0.5], vec![0.1, 0.5, 0.0, -0.5]];
        let s = select_clusters(&fits, 3).unwrap();
        assert_eq!(s.indices, vec![1, 3, 0]);
        assert!(!s.degenerate);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let s = select_clusters(&vec![vec![0.0; 8]; 3], 6).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2, 3, 4, 5]);
        assert!(s.degenerate);
    }

    #[test]
    fn m_equals_k_and_errors() {
        let fits = vec![vec![0.0, 0.0, 0.0, 0.0]];
        assert_eq!(select_clusters(&fits, 4).unwrap().indices, vec![0, 1, 2, 3]);
        assert!(select_clusters(&fits, 5).is_err());
        assert!(select_clusters(&[], 1).is_err());
    }
}
