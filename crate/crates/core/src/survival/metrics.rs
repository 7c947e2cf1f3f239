//! Discrimination and clinical-utility metrics for survival predictions.

use serde::{Deserialize, Serialize};

use super::km::{censoring_distribution, kaplan_meier};
use crate::error::{Error, Result};

/// Default td-AUC grid: integer years 1..=23.
pub fn default_auc_times() -> Vec<f64> {
    (1..=23).map(f64::from).collect()
}

/// Default decision thresholds 0.01, 0.02, …, 0.99.
pub fn default_thresholds() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

pub const DEFAULT_HORIZON: f64 = 15.0;

fn check_inputs(durations: &[f64], events: &[bool], scores: &[f64]) -> Result<()> {
    if durations.len() != events.len() || durations.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} durations, {} events, {} scores",
            durations.len(),
            events.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    Ok(())
}

/// Fenwick tree over score ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's concordance index. A pair is comparable when the subject with the
/// shorter time had an event, or when both times tie and only one subject had
/// the event. Higher scores mean higher risk; tied scores count one half.
pub fn concordance(durations: &[f64], events: &[bool], risk_scores: &[f64]) -> Result<f64> {
    check_inputs(durations, events, risk_scores)?;
    let n = durations.len();
    // dense ranks of the scores
    let mut by_score: Vec<usize> = (0..n).collect();
    by_score.sort_by(|&a, &b| risk_scores[a].total_cmp(&risk_scores[b]));
    let mut rank = vec![0usize; n];
    let mut r = 0;
    for w in 0..n {
        if w > 0 && risk_scores[by_score[w]] != risk_scores[by_score[w - 1]] {
            r += 1;
        }
        rank[by_score[w]] = r;
    }
    let n_ranks = r + 1;

    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by(|&a, &b| durations[b].total_cmp(&durations[a]));
    let mut tree = Fenwick::new(n_ranks);
    let mut inserted = 0u64;
    let (mut concordant2, mut comparable) = (0u64, 0u64);

    let mut i = 0;
    while i < n {
        let t = durations[by_time[i]];
        let mut j = i;
        while j < n && durations[by_time[j]] == t {
            j += 1;
        }
        let group = &by_time[i..j];
        // censored subjects at t outlive events at t
        for &s in group.iter().filter(|&&s| !events[s]) {
            tree.add(rank[s]);
            inserted += 1;
        }
        for &s in group.iter().filter(|&&s| events[s]) {
            let lower = tree.below(rank[s]);
            let not_higher = tree.below(rank[s] + 1);
            let ties = not_higher - lower;
            concordant2 += 2 * lower + ties;
            comparable += inserted;
        }
        for &s in group.iter().filter(|&&s| events[s]) {
            tree.add(rank[s]);
            inserted += 1;
        }
        i = j;
    }
    if comparable == 0 {
        return Err(Error::Undefined("no comparable pairs for concordance".into()));
    }
    Ok(concordant2 as f64 / (2.0 * comparable as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDependentAuc {
    /// `(time, auc)` for every grid time that had both cases and controls.
    pub points: Vec<(f64, f64)>,
    /// Grid times skipped for lack of cases or controls.
    pub skipped: Vec<f64>,
}

impl TimeDependentAuc {
    /// Unweighted mean over evaluated grid points.
    pub fn mean(&self) -> Option<f64> {
        (!self.points.is_empty()).then(|| self.points.iter().map(|p| p.1).sum::<f64>() / self.points.len() as f64)
    }
}

/// Cumulative/dynamic AUC with inverse-probability-of-censoring weights.
///
/// At time `t`, cases are subjects with an event at or before `t`, weighted by
/// `1 / G(T_i-)` where `G` is the Kaplan-Meier estimate of the censoring
/// distribution; controls are all subjects still under observation after `t`.
pub fn time_dependent_auc(
    durations: &[f64],
    events: &[bool],
    risk_scores: &[f64],
    times: &[f64],
) -> Result<TimeDependentAuc> {
    check_inputs(durations, events, risk_scores)?;
    let g = censoring_distribution(durations, events)?;
    let weights: Vec<f64> = durations.iter().map(|&t| 1.0 / g.before(t)).collect();
    let mut out = TimeDependentAuc {
        points: vec![],
        skipped: vec![],
    };
    for &t in times {
        let mut controls: Vec<f64> = (0..durations.len())
            .filter(|&j| durations[j] > t)
            .map(|j| risk_scores[j])
            .collect();
        let cases: Vec<usize> = (0..durations.len())
            .filter(|&i| events[i] && durations[i] <= t)
            .collect();
        if cases.is_empty() || controls.is_empty() {
            out.skipped.push(t);
            continue;
        }
        controls.sort_by(f64::total_cmp);
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &cases {
            let s = risk_scores[i];
            let lower = controls.partition_point(|&c| c < s);
            let not_higher = controls.partition_point(|&c| c <= s);
            let score = lower as f64 + 0.5 * (not_higher - lower) as f64;
            num += weights[i] * score;
            den += weights[i];
        }
        out.points.push((t, num / (den * controls.len() as f64)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitCurve {
    pub horizon: f64,
    pub thresholds: Vec<f64>,
    pub model: Vec<f64>,
    pub treat_all: Vec<f64>,
    pub treat_none: Vec<f64>,
}

/// Event and event-free mass at `horizon` among `subset`, Kaplan-Meier within
/// the subset. Without censoring these are plain counts.
fn event_masses(durations: &[f64], events: &[bool], subset: &[usize], horizon: f64) -> Result<(f64, f64)> {
    let d: Vec<f64> = subset.iter().map(|&i| durations[i]).collect();
    let e: Vec<bool> = subset.iter().map(|&i| events[i]).collect();
    let km = kaplan_meier(&d, &e)?;
    let surviving = km.surviving_mass_at(horizon);
    Ok((subset.len() as f64 - surviving, surviving))
}

/// Decision-curve net benefit at `horizon`.
///
/// At threshold `p`, patients with `risk >= p` are treated; with `TP` and
/// `FP` the Kaplan-Meier event and event-free mass among them,
/// `NB = TP/n - FP/n * p/(1-p)`.
pub fn net_benefit(
    durations: &[f64],
    events: &[bool],
    risks: &[f64],
    horizon: f64,
    thresholds: &[f64],
) -> Result<NetBenefitCurve> {
    check_inputs(durations, events, risks)?;
    if let Some(r) = risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("risk {r} outside [0, 1]")));
    }
    if let Some(p) = thresholds.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
        return Err(Error::InvalidArgument(format!("threshold {p} outside [0, 1)")));
    }
    let n = durations.len() as f64;
    let everyone: Vec<usize> = (0..durations.len()).collect();
    let (tp_all, fp_all) = event_masses(durations, events, &everyone, horizon)?;
    let mut curve = NetBenefitCurve {
        horizon,
        thresholds: thresholds.to_vec(),
        model: Vec::with_capacity(thresholds.len()),
        treat_all: Vec::with_capacity(thresholds.len()),
        treat_none: vec![0.0; thresholds.len()],
    };
    for &p in thresholds {
        let odds = p / (1.0 - p);
        let treated: Vec<usize> = everyone.iter().copied().filter(|&i| risks[i] >= p).collect();
        let nb = if treated.is_empty() {
            0.0
        } else {
            let (tp, fp) = event_masses(durations, events, &treated, horizon)?;
            tp / n - (fp / n) * odds
        };
        curve.model.push(nb);
        curve.treat_all.push(tp_all / n - (fp_all / n) * odds);
    }
    Ok(curve)
}

/// Kaplan-Meier survival at `horizon` for the whole cohort.
pub fn cohort_event_probability(durations: &[f64], events: &[bool], horizon: f64) -> Result<f64> {
    Ok(1.0 - kaplan_meier(durations, events)?.at(horizon))
}
