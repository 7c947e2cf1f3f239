//! Train/test evaluation of Cox models and head-to-head split comparisons.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cox::{fit_coxph, CoxData, CoxModel, CoxOptions};
use super::metrics::{concordance, net_benefit, time_dependent_auc, NetBenefitCurve, TimeDependentAuc};
use crate::cohort::{stratified_splits, DesignMatrix, Split, SplitSpec, Standardizer};
use crate::error::{Error, Result};

/// Time grid, horizon and thresholds for scoring a model on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub times: Vec<f64>,
    pub horizon: f64,
    pub thresholds: Vec<f64>,
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self {
            times: super::metrics::default_auc_times(),
            horizon: super::metrics::DEFAULT_HORIZON,
            thresholds: super::metrics::default_thresholds(),
        }
    }
}

/// Scores of one fitted model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub concordance: f64,
    pub td_auc: TimeDependentAuc,
    pub net_benefit: NetBenefitCurve,
}

/// A model fitted on standardized training rows, with the standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: CoxModel,
    pub standardizer: Standardizer,
}

impl FittedModel {
    pub fn fit(design: &DesignMatrix, train: &[usize], opts: &CoxOptions) -> Result<Self> {
        let standardizer = Standardizer::fit(design, train);
        let t = standardizer.apply(&design.subset(train));
        let data = CoxData::new(&t.values, t.p(), &t.durations, &t.events)?;
        Ok(Self {
            model: fit_coxph(&data, opts)?,
            standardizer,
        })
    }

    pub fn linear_predictor(&self, row: &[f64]) -> Result<f64> {
        self.model.linear_predictor(&self.standardizer.apply_row(row))
    }

    pub fn predict_risk(&self, row: &[f64], horizon: f64) -> Result<f64> {
        self.model.predict_risk(&self.standardizer.apply_row(row), horizon)
    }

    /// Concordance (on the linear predictor), td-AUC and net benefit on `rows`.
    pub fn evaluate(&self, design: &DesignMatrix, rows: &[usize], grid: &EvalGrid) -> Result<ModelEvaluation> {
        let durations: Vec<f64> = rows.iter().map(|&r| design.durations[r]).collect();
        let events: Vec<bool> = rows.iter().map(|&r| design.events[r]).collect();
        let eta = rows
            .iter()
            .map(|&r| self.linear_predictor(design.row(r)))
            .collect::<Result<Vec<_>>>()?;
        let risk = rows
            .iter()
            .map(|&r| self.predict_risk(design.row(r), grid.horizon))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelEvaluation {
            concordance: concordance(&durations, &events, &eta)?,
            td_auc: time_dependent_auc(&durations, &events, &eta, &grid.times)?,
            net_benefit: net_benefit(&durations, &events, &risk, grid.horizon, &grid.thresholds)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split: usize,
    pub baseline_concordance: f64,
    pub augmented_concordance: f64,
}

/// Split-averaged performance of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub columns: Vec<String>,
    pub concordance_mean: f64,
    pub concordance_std: f64,
    /// `(time, mean AUC)` over the splits where that time was evaluable.
    pub td_auc: Vec<(f64, f64)>,
    pub td_auc_mean: f64,
    pub net_benefit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub penalizer: f64,
    pub l1_ratio: f64,
    pub horizon: f64,
    pub n_patients: usize,
    pub n_events: usize,
    /// Share of evaluated splits where the augmented model's test concordance
    /// is strictly higher.
    pub win_fraction: f64,
    pub wins: usize,
    pub evaluated_splits: usize,
    /// Splits dropped because a fit failed or a metric was undefined.
    pub failed_splits: usize,
    pub baseline: ModelSummary,
    pub augmented: ModelSummary,
    pub thresholds: Vec<f64>,
    pub nb_treat_all: Vec<f64>,
    pub nb_treat_none: Vec<f64>,
    pub splits: Vec<SplitOutcome>,
}

struct SplitResult {
    outcome: SplitOutcome,
    baseline: ModelEvaluation,
    augmented: ModelEvaluation,
}

fn run_split(
    baseline: &DesignMatrix,
    augmented: &DesignMatrix,
    split: &Split,
    opts: &CoxOptions,
    grid: &EvalGrid,
) -> Result<SplitResult> {
    let b = FittedModel::fit(baseline, &split.train, opts)?.evaluate(baseline, &split.test, grid)?;
    let a = FittedModel::fit(augmented, &split.train, opts)?.evaluate(augmented, &split.test, grid)?;
    Ok(SplitResult {
        outcome: SplitOutcome {
            split: split.index,
            baseline_concordance: b.concordance,
            augmented_concordance: a.concordance,
        },
        baseline: b,
        augmented: a,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn mean_curve<'a>(curves: impl Iterator<Item = &'a [f64]>, len: usize) -> Vec<f64> {
    let mut sum = vec![0.0; len];
    let mut count = 0usize;
    for c in curves {
        for (s, v) in sum.iter_mut().zip(c) {
            *s += v;
        }
        count += 1;
    }
    sum.into_iter().map(|s| s / count as f64).collect()
}

fn summarize<'a>(
    columns: &[String],
    evals: impl Iterator<Item = &'a ModelEvaluation> + Clone,
    grid: &EvalGrid,
) -> ModelSummary {
    let c: Vec<f64> = evals.clone().map(|e| e.concordance).collect();
    let (concordance_mean, concordance_std) = mean_std(&c);
    // keyed by grid index so that equal float times collapse deterministically
    let mut per_time: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in evals.clone() {
        for &(t, auc) in &e.td_auc.points {
            if let Some(i) = grid.times.iter().position(|&g| g == t) {
                let slot = per_time.entry(i).or_insert((0.0, 0));
                slot.0 += auc;
                slot.1 += 1;
            }
        }
    }
    let td_auc: Vec<(f64, f64)> = per_time
        .into_iter()
        .map(|(i, (s, n))| (grid.times[i], s / n as f64))
        .collect();
    let td_auc_mean = td_auc.iter().map(|p| p.1).sum::<f64>() / td_auc.len().max(1) as f64;
    ModelSummary {
        columns: columns.to_vec(),
        concordance_mean,
        concordance_std,
        td_auc,
        td_auc_mean,
        net_benefit: mean_curve(evals.map(|e| e.net_benefit.model.as_slice()), grid.thresholds.len()),
    }
}

/// Fits baseline and augmented models on the training part of every split and
/// compares their held-out concordance, td-AUC and net benefit.
///
/// Splits are processed in parallel; results are aggregated in split order,
/// so the report depends only on the inputs and `spec.seed`.
pub fn head_to_head(
    baseline: &DesignMatrix,
    augmented: &DesignMatrix,
    spec: &SplitSpec,
    opts: &CoxOptions,
    grid: &EvalGrid,
) -> Result<EvaluationReport> {
    if baseline.patient_ids != augmented.patient_ids {
        return Err(Error::InvalidArgument(
            "baseline and augmented designs must list the same patients in the same order".into(),
        ));
    }
    let splits = stratified_splits(&baseline.events, spec)?;
    let results: Vec<Option<SplitResult>> = splits
        .par_iter()
        .map(|s| run_split(baseline, augmented, s, opts, grid).ok())
        .collect();
    let failed_splits = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<SplitResult> = results.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Undefined(format!("all {failed_splits} splits failed to fit or evaluate")));
    }
    let wins = ok
        .iter()
        .filter(|r| r.outcome.augmented_concordance > r.outcome.baseline_concordance)
        .count();
    let nb_treat_all = mean_curve(ok.iter().map(|r| r.baseline.net_benefit.treat_all.as_slice()), grid.thresholds.len());
    Ok(EvaluationReport {
        seed: spec.seed,
        n_splits: spec.n_splits,
        test_fraction: spec.test_fraction,
        penalizer: opts.penalizer,
        l1_ratio: opts.l1_ratio,
        horizon: grid.horizon,
        n_patients: baseline.n(),
        n_events: baseline.n_events(),
        win_fraction: wins as f64 / ok.len() as f64,
        wins,
        evaluated_splits: ok.len(),
        failed_splits,
        baseline: summarize(&baseline.columns, ok.iter().map(|r| &r.baseline), grid),
        augmented: summarize(&augmented.columns, ok.iter().map(|r| &r.augmented), grid),
        thresholds: grid.thresholds.clone(),
        nb_treat_all,
        nb_treat_none: vec![0.0; grid.thresholds.len()],
        splits: ok.into_iter().map(|r| r.outcome).collect(),
    })
}

/// Writes `time,auc`.
pub fn write_td_auc_csv(path: impl AsRef<Path>, points: &[(f64, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "auc"])?;
    for (t, a) in points {
        w.write_record([t.to_string(), a.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `threshold,nb_model,nb_all,nb_none`.
pub fn write_net_benefit_csv(
    path: impl AsRef<Path>,
    thresholds: &[f64],
    model: &[f64],
    treat_all: &[f64],
    treat_none: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "nb_model", "nb_all", "nb_none"])?;
    for i in 0..thresholds.len() {
        w.write_record([
            thresholds[i].to_string(),
            model[i].to_string(),
            treat_all[i].to_string(),
            treat_none[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
