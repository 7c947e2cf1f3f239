//! Elastic-net Cox models, Kaplan-Meier curves and the survival evaluation
//! battery: concordance, time-dependent AUC, net benefit and head-to-head
//! split comparisons.

mod cox;
mod evaluate;
mod km;
mod metrics;

pub use cox::{
    breslow_baseline, coefficient_table, fit_coxph, neg_log_partial_likelihood, observed_information,
    penalized_objective, predict_risk, write_coefficient_csv, BaselineHazard, CoefficientRow, CoefficientTable,
    ConvergenceReport, CoxData, CoxModel, CoxOptions, Solver, Ties, DEFAULT_L1_RATIO, DEFAULT_PENALIZER,
    DIVERGENCE_BOUND,
};
pub use evaluate::{
    head_to_head, write_net_benefit_csv, write_td_auc_csv, EvalGrid, EvaluationReport, FittedModel,
    ModelEvaluation, ModelSummary, SplitOutcome,
};
pub use km::{censoring_distribution, kaplan_meier, SurvivalCurve};
pub use metrics::{
    cohort_event_probability, concordance, default_auc_times, default_thresholds, net_benefit,
    time_dependent_auc, NetBenefitCurve, TimeDependentAuc, DEFAULT_HORIZON,
};
