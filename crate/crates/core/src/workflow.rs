//! The cohort survival workflow: select informative clusters, build baseline
//! and augmented designs, and compare them over stratified splits.

use serde::{Deserialize, Serialize};

use crate::cohort::{
    build_design_matrix, importance_fits, select_clusters, ClusterFractions, ClusterSelection, CovariateSet,
    DesignMatrix, SplitSpec, DEFAULT_IMPORTANCE_FITS, DEFAULT_SELECTED,
};
use crate::datastore::ClinicalTable;
use crate::error::{Error, Result};
use crate::survival::{coefficient_table, head_to_head, CoefficientTable, CoxOptions, EvalGrid, EvaluationReport, FittedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowParams {
    pub covariates: CovariateSet,
    /// Add selected cluster fractions to the augmented model.
    pub include_fractions: bool,
    /// Use these clusters instead of running the importance analysis.
    pub clusters: Option<Vec<usize>>,
    pub n_selected: usize,
    pub importance_fits: usize,
    pub splits: SplitSpec,
    pub cox: CoxOptions,
    pub grid: EvalGrid,
}

impl Default for WorkflowParams {
    fn default() -> Self {
        Self {
            covariates: CovariateSet::CapraS,
            include_fractions: true,
            clusters: None,
            n_selected: DEFAULT_SELECTED,
            importance_fits: DEFAULT_IMPORTANCE_FITS,
            splits: SplitSpec::default(),
            cox: CoxOptions::default(),
            grid: EvalGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowReport {
    pub covariates: CovariateSet,
    pub selection: Option<ClusterSelection>,
    pub importance_failed: usize,
    pub excluded: Vec<(String, String)>,
    pub evaluation: EvaluationReport,
    /// Fits on every patient, for reporting.
    pub baseline_table: CoefficientTable,
    pub augmented_table: CoefficientTable,
}

fn full_table(design: &DesignMatrix, opts: &CoxOptions) -> Result<CoefficientTable> {
    let all: Vec<usize> = (0..design.n()).collect();
    let fitted = FittedModel::fit(design, &all, opts)?;
    let z = fitted.standardizer.apply(design);
    coefficient_table(&fitted.model, &z.cox_data()?, &design.columns, &design.reference_levels)
}

/// Runs selection (unless clusters are given) and the head-to-head comparison.
pub fn run_survival_workflow(
    clinical: &ClinicalTable,
    fractions: &[ClusterFractions],
    params: &WorkflowParams,
) -> Result<WorkflowReport> {
    let k = fractions
        .first()
        .map(|f| f.fractions.len())
        .ok_or_else(|| Error::InvalidArgument("no cluster fractions".into()))?;
    let baseline = build_design_matrix(clinical, fractions, &[], Some(params.covariates), false)?;

    let (selected, selection, importance_failed) = match (&params.clusters, params.include_fractions) {
        (_, false) => (vec![], None, 0),
        (Some(c), true) => (c.clone(), None, 0),
        (None, true) => {
            // restrict the importance analysis to the patients of the baseline design
            let all: Vec<usize> = (0..k).collect();
            let mut frac = build_design_matrix(clinical, fractions, &all, None, true)?;
            let keep: Vec<usize> = (0..frac.n())
                .filter(|&i| baseline.patient_ids.binary_search(&frac.patient_ids[i]).is_ok())
                .collect();
            frac = frac.subset(&keep);
            let spec = SplitSpec {
                n_splits: params.importance_fits,
                ..params.splits
            };
            let fits = importance_fits(&frac, &spec, &params.cox)?;
            let sel = select_clusters(&fits.coefficients, params.n_selected)?;
            (sel.indices.clone(), Some(sel), fits.failed)
        }
    };
    let augmented = build_design_matrix(clinical, fractions, &selected, Some(params.covariates), params.include_fractions)?;
    let evaluation = head_to_head(&baseline, &augmented, &params.splits, &params.cox, &params.grid)?;
    Ok(WorkflowReport {
        covariates: params.covariates,
        selection,
        importance_failed,
        excluded: baseline.excluded.clone(),
        baseline_table: full_table(&baseline, &params.cox)?,
        augmented_table: full_table(&augmented, &params.cox)?,
        evaluation,
    })
}
