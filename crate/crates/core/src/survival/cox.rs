//! Elastic-net penalized Cox proportional hazards.
//!
//! Training objective:
//!
//! ```text
//! F(beta) = -log PL(beta) + penalizer * (l1_ratio * |beta|_1 + (1 - l1_ratio) / 2 * |beta|_2^2)
//! ```
//!
//! where `PL` is the partial likelihood with Efron (default) or Breslow tie
//! handling. The smooth part is minimized together with the L1 term by
//! proximal steps with a backtracking line search, so `F` does not increase
//! between iterations beyond floating-point resolution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penalizer used for all survival models in the cohort workflow.
pub const DEFAULT_PENALIZER: f64 = 0.001;
/// Elastic-net mixing used for all survival models in the cohort workflow.
pub const DEFAULT_L1_RATIO: f64 = 0.5;

/// `|beta_j| * sd(x_j)` beyond this is treated as divergence: a hazard ratio
/// of e^30 per standard deviation only arises from separated data.
pub const DIVERGENCE_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

/// Borrowed survival data: row-major `n × p` covariates plus outcomes.
#[derive(Debug, Clone, Copy)]
pub struct CoxData<'a> {
    pub x: &'a [f64],
    pub n_features: usize,
    pub durations: &'a [f64],
    pub events: &'a [bool],
}

impl<'a> CoxData<'a> {
    pub fn new(x: &'a [f64], n_features: usize, durations: &'a [f64], events: &'a [bool]) -> Result<Self> {
        let n = durations.len();
        if events.len() != n || x.len() != n * n_features {
            return Err(Error::InvalidArgument(format!(
                "inconsistent survival data: {} durations, {} events, {} covariate values for p={n_features}",
                n,
                events.len(),
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / n_features.max(1),
                col: i % n_features.max(1),
            });
        }
        if let Some(i) = durations.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidArgument(format!("duration {i} must be positive and finite")));
        }
        Ok(Self {
            x,
            n_features,
            durations,
            events,
        })
    }

    pub fn n(&self) -> usize {
        self.durations.len()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| dot(self.row(i), beta)).collect()
    }

    /// Groups of subject indices sharing a duration, latest time first.
    fn time_groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.durations[b].total_cmp(&self.durations[a]).then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if self.durations[g[0]] == self.durations[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        groups
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value, gradient and (optionally) Hessian of the negative log partial likelihood.
#[derive(Debug, Clone)]
pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

fn evaluate(data: &CoxData<'_>, beta: &[f64], ties: Ties, with_hessian: bool) -> Result<LikelihoodEval> {
    let p = data.n_features;
    if beta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: beta.len(),
        });
    }
    if data.n_events() == 0 {
        return Err(Error::Undefined("partial likelihood needs at least one event".into()));
    }
    let eta = data.linear_predictor(beta);
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut value = 0.0;
    let mut grad = vec![0.0; p];
    let mut hess = with_hessian.then(|| DMatrix::<f64>::zeros(p, p));

    // risk-set accumulators over subjects with duration >= current time
    let mut s_r = 0.0;
    let mut s_rx = vec![0.0; p];
    let mut s_rxx = with_hessian.then(|| DMatrix::<f64>::zeros(p, p));

    let mut s_dx = vec![0.0; p];
    let mut a = vec![0.0; p];
    for group in data.time_groups() {
        let mut s_d = 0.0;
        s_dx.iter_mut().for_each(|v| *v = 0.0);
        let mut s_dxx = with_hessian.then(|| DMatrix::<f64>::zeros(p, p));
        let mut d = 0usize;
        for &i in &group {
            let xi = data.row(i);
            s_r += w[i];
            for j in 0..p {
                s_rx[j] += w[i] * xi[j];
            }
            if let Some(m) = s_rxx.as_mut() {
                add_outer(m, xi, w[i]);
            }
            if data.events[i] {
                d += 1;
                s_d += w[i];
                for j in 0..p {
                    s_dx[j] += w[i] * xi[j];
                    grad[j] -= xi[j];
                }
                value -= eta[i];
                if let Some(m) = s_dxx.as_mut() {
                    add_outer(m, xi, w[i]);
                }
            }
        }
        if d == 0 {
            continue;
        }
        for l in 0..d {
            let c = match ties {
                Ties::Efron => l as f64 / d as f64,
                Ties::Breslow => 0.0,
            };
            let phi = s_r - c * s_d;
            value += phi.ln() + shift;
            for j in 0..p {
                a[j] = s_rx[j] - c * s_dx[j];
                grad[j] += a[j] / phi;
            }
            if let (Some(h), Some(rxx)) = (hess.as_mut(), s_rxx.as_ref()) {
                let dxx = s_dxx.as_ref().unwrap();
                for r in 0..p {
                    for q in 0..p {
                        h[(r, q)] += (rxx[(r, q)] - c * dxx[(r, q)]) / phi - a[r] * a[q] / (phi * phi);
                    }
                }
            }
        }
    }
    Ok(LikelihoodEval {
        value,
        gradient: grad,
        hessian: hess,
    })
}

fn add_outer(m: &mut DMatrix<f64>, x: &[f64], w: f64) {
    let p = x.len();
    for r in 0..p {
        let wr = w * x[r];
        for q in 0..p {
            m[(r, q)] += wr * x[q];
        }
    }
}

/// Negative log partial likelihood and its analytic gradient.
pub fn neg_log_partial_likelihood(data: &CoxData<'_>, beta: &[f64], ties: Ties) -> Result<(f64, Vec<f64>)> {
    let e = evaluate(data, beta, ties, false)?;
    Ok((e.value, e.gradient))
}

/// Observed information (Hessian of the negative log partial likelihood).
pub fn observed_information(data: &CoxData<'_>, beta: &[f64], ties: Ties) -> Result<DMatrix<f64>> {
    Ok(evaluate(data, beta, ties, true)?.hessian.unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Proximal Newton: the local quadratic model plus the L1 term is solved
    /// by coordinate descent and an exact solve on its support, followed by a
    /// backtracking line search.
    #[default]
    ProximalNewton,
    /// ISTA with backtracking.
    ProximalGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxOptions {
    pub penalizer: f64,
    pub l1_ratio: f64,
    pub ties: Ties,
    pub solver: Solver,
    /// Stop once the minimum-norm subgradient of the objective is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            penalizer: DEFAULT_PENALIZER,
            l1_ratio: DEFAULT_L1_RATIO,
            ties: Ties::Efron,
            solver: Solver::ProximalNewton,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

impl CoxOptions {
    pub fn penalized(penalizer: f64, l1_ratio: f64) -> Self {
        Self {
            penalizer,
            l1_ratio,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.penalizer >= 0.0 && self.penalizer.is_finite()) {
            return Err(Error::InvalidArgument(format!("penalizer must be >= 0, got {}", self.penalizer)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidArgument(format!("l1_ratio must be in [0, 1], got {}", self.l1_ratio)));
        }
        Ok(())
    }

    fn l1(&self) -> f64 {
        self.penalizer * self.l1_ratio
    }

    fn l2(&self) -> f64 {
        self.penalizer * (1.0 - self.l1_ratio)
    }
}

/// Penalized objective at `beta`.
pub fn penalized_objective(data: &CoxData<'_>, beta: &[f64], opts: &CoxOptions) -> Result<f64> {
    let (nll, _) = neg_log_partial_likelihood(data, beta, opts.ties)?;
    Ok(nll + penalty(beta, opts))
}

fn penalty(beta: &[f64], opts: &CoxOptions) -> f64 {
    opts.l1() * beta.iter().map(|b| b.abs()).sum::<f64>() + 0.5 * opts.l2() * beta.iter().map(|b| b * b).sum::<f64>()
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Norm of the minimum-norm element of the objective's subdifferential, given
/// the gradient of the smooth part.
fn subgradient_norm(beta: &[f64], smooth_grad: &[f64], l1: f64) -> f64 {
    beta.iter()
        .zip(smooth_grad)
        .map(|(&b, &g)| {
            let s = if b > 0.0 {
                g + l1
            } else if b < 0.0 {
                g - l1
            } else {
                soft_threshold(g, l1)
            };
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub subgradient_norm: f64,
    pub objective: f64,
    /// Objective after each accepted iteration, starting at the zero vector.
    /// Non-increasing up to a relative rounding slack of 1e-12.
    pub objective_history: Vec<f64>,
    pub solver: Solver,
}

/// Breslow cumulative baseline hazard, a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    /// Distinct event times, ascending.
    pub times: Vec<f64>,
    /// Cumulative hazard just after each time.
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0.0,
            i => self.cumulative[i - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub coefficients: Vec<f64>,
    pub penalizer: f64,
    pub l1_ratio: f64,
    pub ties: Ties,
    pub baseline: BaselineHazard,
    pub convergence: ConvergenceReport,
    pub n_observations: usize,
    pub n_events: usize,
}

impl CoxModel {
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: x.len(),
            });
        }
        Ok(dot(x, &self.coefficients))
    }

    /// Probability of the event by `horizon`: `1 - exp(-H0(h) * exp(x'beta))`.
    pub fn predict_risk(&self, x: &[f64], horizon: f64) -> Result<f64> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let eta = self.linear_predictor(x)?;
        let risk = -(-self.baseline.at(horizon) * eta.exp()).exp_m1();
        Ok(risk.clamp(0.0, 1.0))
    }
}

/// Free-function form of [`CoxModel::predict_risk`].
pub fn predict_risk(model: &CoxModel, x: &[f64], horizon: f64) -> Result<f64> {
    model.predict_risk(x, horizon)
}

/// Breslow estimator of the cumulative baseline hazard for coefficients `beta`.
pub fn breslow_baseline(data: &CoxData<'_>, beta: &[f64]) -> Result<BaselineHazard> {
    if beta.len() != data.n_features {
        return Err(Error::DimensionMismatch {
            expected: data.n_features,
            actual: beta.len(),
        });
    }
    let risk: Vec<f64> = data.linear_predictor(beta).into_iter().map(f64::exp).collect();
    let mut steps = Vec::new();
    let mut s_r = 0.0;
    for group in data.time_groups() {
        s_r += group.iter().map(|&i| risk[i]).sum::<f64>();
        let d = group.iter().filter(|&&i| data.events[i]).count();
        if d > 0 {
            steps.push((data.durations[group[0]], d as f64 / s_r));
        }
    }
    steps.reverse();
    let mut cum = 0.0;
    let (times, cumulative) = steps
        .into_iter()
        .map(|(t, h)| {
            cum += h;
            (t, cum)
        })
        .unzip();
    Ok(BaselineHazard { times, cumulative })
}

fn column_sd(data: &CoxData<'_>) -> Vec<f64> {
    let n = data.n() as f64;
    (0..data.n_features)
        .map(|j| {
            let mean = (0..data.n()).map(|i| data.row(i)[j]).sum::<f64>() / n;
            ((0..data.n()).map(|i| (data.row(i)[j] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Fits an elastic-net Cox model starting from `beta = 0`.
pub fn fit_coxph(data: &CoxData<'_>, opts: &CoxOptions) -> Result<CoxModel> {
    opts.validate()?;
    let p = data.n_features;
    let sd = column_sd(data);
    let l1 = opts.l1();
    let l2 = opts.l2();

    let smooth = |beta: &[f64], hess: bool| -> Result<LikelihoodEval> {
        let mut e = evaluate(data, beta, opts.ties, hess)?;
        e.value += 0.5 * l2 * beta.iter().map(|b| b * b).sum::<f64>();
        for (g, b) in e.gradient.iter_mut().zip(beta) {
            *g += l2 * b;
        }
        if let Some(h) = e.hessian.as_mut() {
            for j in 0..p {
                h[(j, j)] += l2;
            }
        }
        Ok(e)
    };
    let l1_norm = |b: &[f64]| b.iter().map(|v| v.abs()).sum::<f64>();

    let mut beta = vec![0.0; p];
    let mut cur = smooth(&beta, opts.solver == Solver::ProximalNewton)?;
    let mut objective = cur.value + l1 * l1_norm(&beta);
    let mut history = vec![objective];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut gnorm = subgradient_norm(&beta, &cur.gradient, l1);

    while gnorm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                grad_norm: gnorm,
                objective,
            });
        }
        iterations += 1;

        let proposal = match opts.solver {
            Solver::ProximalNewton => newton_step(&beta, &cur, l1, objective, &smooth, &l1_norm)?,
            Solver::ProximalGradient => None,
        };
        let (next_beta, next) = match proposal {
            Some(accepted) => accepted,
            None => {
                let (b, e, t) = ista_step(&beta, &cur, l1, objective, step, &smooth, &l1_norm)?;
                step = t * 2.0;
                let e = if opts.solver == Solver::ProximalNewton {
                    smooth(&b, true)?
                } else {
                    e
                };
                (b, e)
            }
        };
        let next_obj = next.value + l1 * l1_norm(&next_beta);
        if next_obj > objective + precision_slack(objective) {
            // no descent possible at working precision
            break;
        }
        let stalled = next_beta == beta;
        beta = next_beta;
        cur = next;
        objective = next_obj;
        history.push(objective);
        gnorm = subgradient_norm(&beta, &cur.gradient, l1);

        let scaled = beta.iter().zip(&sd).map(|(b, s)| (b * s).abs()).fold(0.0, f64::max);
        if scaled > DIVERGENCE_BOUND || !objective.is_finite() {
            return Err(Error::Diverged {
                iterations,
                scaled_norm: scaled,
            });
        }
        if stalled {
            break;
        }
    }
    if gnorm > opts.tol {
        return Err(Error::NotConverged {
            iterations,
            grad_norm: gnorm,
            objective,
        });
    }

    let baseline = breslow_baseline(data, &beta)?;
    Ok(CoxModel {
        coefficients: beta,
        penalizer: opts.penalizer,
        l1_ratio: opts.l1_ratio,
        ties: opts.ties,
        baseline,
        convergence: ConvergenceReport {
            iterations,
            subgradient_norm: gnorm,
            objective,
            objective_history: history,
            solver: opts.solver,
        },
        n_observations: data.n(),
        n_events: data.n_events(),
    })
}

/// Objective changes this small are indistinguishable from rounding.
fn precision_slack(objective: f64) -> f64 {
    1e-12 * objective.abs().max(1.0)
}

type Smooth<'s> = dyn Fn(&[f64], bool) -> Result<LikelihoodEval> + 's;

/// One ISTA step with backtracking; returns the new point, its smooth
/// evaluation and the accepted step size.
fn ista_step(
    beta: &[f64],
    cur: &LikelihoodEval,
    l1: f64,
    objective: f64,
    mut t: f64,
    smooth: &Smooth<'_>,
    l1_norm: &dyn Fn(&[f64]) -> f64,
) -> Result<(Vec<f64>, LikelihoodEval, f64)> {
    loop {
        let cand: Vec<f64> = beta
            .iter()
            .zip(&cur.gradient)
            .map(|(b, g)| soft_threshold(b - t * g, t * l1))
            .collect();
        let e = smooth(&cand, false)?;
        let diff: Vec<f64> = cand.iter().zip(beta).map(|(a, b)| a - b).collect();
        let bound = cur.value + dot(&cur.gradient, &diff) + dot(&diff, &diff) / (2.0 * t);
        let obj = e.value + l1 * l1_norm(&cand);
        let slack = precision_slack(objective);
        // below the objective's resolution, progress is judged by stationarity
        let descends = obj <= objective
            || (obj <= objective + slack
                && subgradient_norm(&cand, &e.gradient, l1) < subgradient_norm(beta, &cur.gradient, l1));
        if e.value.is_finite() && e.value <= bound + slack && descends {
            return Ok((cand, e, t));
        }
        t *= 0.5;
        if t < 1e-20 {
            return Ok((beta.to_vec(), smooth(beta, false)?, t));
        }
    }
}

/// Proximal Newton direction with Armijo backtracking. `None` when the line
/// search fails to find sufficient decrease.
fn newton_step(
    beta: &[f64],
    cur: &LikelihoodEval,
    l1: f64,
    objective: f64,
    smooth: &Smooth<'_>,
    l1_norm: &dyn Fn(&[f64]) -> f64,
) -> Result<Option<(Vec<f64>, LikelihoodEval)>> {
    let h = cur.hessian.as_ref().expect("newton step needs the hessian");
    let p = beta.len();
    let z = solve_quadratic_l1(h, &cur.gradient, beta, l1);
    let d: Vec<f64> = z.iter().zip(beta).map(|(a, b)| a - b).collect();
    let delta = dot(&cur.gradient, &d) + l1 * (l1_norm(&z) - l1_norm(beta));
    if !(delta < 0.0) {
        return Ok(None);
    }
    let resolution = precision_slack(objective);
    if -delta <= resolution {
        // predicted decrease is below what the objective can resolve: take the
        // full step when it stays within rounding and improves stationarity
        let e = smooth(&z, true)?;
        let obj = e.value + l1 * l1_norm(&z);
        let improves = subgradient_norm(&z, &e.gradient, l1) < subgradient_norm(beta, &cur.gradient, l1);
        return Ok((obj <= objective + resolution && improves).then_some((z, e)));
    }
    let mut s = 1.0;
    for _ in 0..50 {
        let cand: Vec<f64> = (0..p).map(|j| if s == 1.0 { z[j] } else { beta[j] + s * d[j] }).collect();
        let e = smooth(&cand, true)?;
        let obj = e.value + l1 * l1_norm(&cand);
        if obj.is_finite() && obj <= objective + 1e-4 * s * delta {
            return Ok(Some((cand, e)));
        }
        s *= 0.5;
    }
    Ok(None)
}

/// Minimizes `g'(z - b) + 1/2 (z - b)' H (z - b) + l1 |z|_1`.
///
/// Cyclic coordinate descent identifies the nonzero pattern; the quadratic
/// restricted to that pattern (with signs fixed) is then solved exactly and
/// accepted once it satisfies the optimality conditions. Coordinate descent
/// alone crawls on the near-collinear designs that cluster fractions produce.
fn solve_quadratic_l1(h: &DMatrix<f64>, g: &[f64], b: &[f64], l1: f64) -> Vec<f64> {
    let p = b.len();
    let mut z = b.to_vec();
    // r = g + H (z - b), the gradient of the quadratic part at z
    let residual = |z: &[f64]| -> Vec<f64> {
        (0..p)
            .map(|k| g[k] + (0..p).map(|j| h[(k, j)] * (z[j] - b[j])).sum::<f64>())
            .collect()
    };
    let mut r = g.to_vec();
    for _round in 0..100 {
        let mut converged = false;
        for _sweep in 0..20 {
            let mut max_change: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..p {
                let hjj = h[(j, j)];
                if hjj <= 0.0 {
                    continue;
                }
                let new = soft_threshold(hjj * z[j] - r[j], l1) / hjj;
                let delta = new - z[j];
                if delta != 0.0 {
                    for k in 0..p {
                        r[k] += h[(k, j)] * delta;
                    }
                    z[j] = new;
                    max_change = max_change.max(delta.abs());
                }
                scale = scale.max(z[j].abs());
            }
            if max_change <= 1e-13 * scale.max(1.0) {
                converged = true;
                break;
            }
        }
        if converged {
            return z;
        }
        if let Some(exact) = solve_on_support(h, g, b, l1, &z) {
            let r_exact = residual(&exact);
            let kkt = (0..p).all(|j| exact[j] != 0.0 || r_exact[j].abs() <= l1 * (1.0 + 1e-9) + 1e-12);
            if kkt {
                return exact;
            }
            z = exact;
            r = r_exact;
        }
    }
    z
}

/// Exact minimizer over a sub-support of `z` that keeps the signs of `z`.
///
/// When the unconstrained solution flips a sign, moves toward it until the
/// first coordinate reaches zero, drops that coordinate and solves again.
fn solve_on_support(h: &DMatrix<f64>, g: &[f64], b: &[f64], l1: f64, z: &[f64]) -> Option<Vec<f64>> {
    let p = z.len();
    let mut cur = z.to_vec();
    loop {
        let support: Vec<usize> = (0..p).filter(|&j| cur[j] != 0.0).collect();
        if support.is_empty() {
            return Some(cur);
        }
        let m = support.len();
        let h_aa = DMatrix::from_fn(m, m, |a, c| h[(support[a], support[c])]);
        // g_A + H_A.(z - b) = -l1 sign(z_A) with z = 0 off the support
        let rhs = nalgebra::DVector::from_fn(m, |a, _| {
            let j = support[a];
            let off: f64 = (0..p).map(|k| h[(j, k)] * b[k]).sum();
            off - g[j] - l1 * cur[j].signum()
        });
        let sol = h_aa.cholesky()?.solve(&rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut t = 1.0;
        let mut blocking = None;
        for (a, &j) in support.iter().enumerate() {
            if sol[a].signum() != cur[j].signum() {
                let tj = cur[j] / (cur[j] - sol[a]);
                if tj < t {
                    t = tj;
                    blocking = Some(j);
                }
            }
        }
        for (a, &j) in support.iter().enumerate() {
            cur[j] += t * (sol[a] - cur[j]);
            if sol[a].signum() != cur[j].signum() && blocking.is_some() {
                // crossed or touched zero along the path
                if cur[j].abs() <= 1e-15 * (1.0 + sol[a].abs()) || Some(j) == blocking {
                    cur[j] = 0.0;
                }
            }
        }
        match blocking {
            None => return Some(cur),
            Some(j) => cur[j] = 0.0,
        }
    }
}

/// One row of a coefficient report. Standard errors come from the observed
/// information of the unpenalized likelihood at the penalized optimum, so they
/// are descriptive only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub variable: String,
    pub coefficient: Option<f64>,
    pub exp_coefficient: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
    pub concordance: f64,
    pub l1_ratio: f64,
    pub penalizer: f64,
    pub observations: usize,
    pub events: usize,
    pub se_note: String,
}

/// Coefficient report in the usual `coef / exp(coef) / SE / 95% CI / p` layout.
/// `reference_levels` are emitted first as empty rows (e.g. `GG1 (ref.)`).
pub fn coefficient_table(
    model: &CoxModel,
    data: &CoxData<'_>,
    names: &[String],
    reference_levels: &[String],
) -> Result<CoefficientTable> {
    use statrs::function::erf::erfc;

    if names.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            actual: names.len(),
        });
    }
    let info = observed_information(data, &model.coefficients, model.ties)?;
    let cov = info.clone().cholesky().map(|c| c.inverse());
    let z95 = 1.959_963_984_540_054;
    let mut rows: Vec<CoefficientRow> = reference_levels
        .iter()
        .map(|v| CoefficientRow {
            variable: format!("{v} (ref.)"),
            coefficient: None,
            exp_coefficient: None,
            se: None,
            ci_lower: None,
            ci_upper: None,
            p: None,
        })
        .collect();
    for (j, name) in names.iter().enumerate() {
        let b = model.coefficients[j];
        let se = cov.as_ref().map(|c| c[(j, j)].sqrt()).filter(|s| s.is_finite());
        rows.push(CoefficientRow {
            variable: name.clone(),
            coefficient: Some(b),
            exp_coefficient: Some(b.exp()),
            se,
            ci_lower: se.map(|s| b - z95 * s),
            ci_upper: se.map(|s| b + z95 * s),
            p: se.map(|s| erfc((b / s).abs() / std::f64::consts::SQRT_2)),
        });
    }
    let eta: Vec<f64> = (0..data.n()).map(|i| dot(data.row(i), &model.coefficients)).collect();
    let concordance = super::metrics::concordance(data.durations, data.events, &eta)?;
    Ok(CoefficientTable {
        rows,
        concordance,
        l1_ratio: model.l1_ratio,
        penalizer: model.penalizer,
        observations: model.n_observations,
        events: model.n_events,
        se_note: "standard errors from the unpenalized observed information at the penalized optimum; descriptive only"
            .into(),
    })
}

pub fn write_coefficient_csv(path: impl AsRef<std::path::Path>, table: &CoefficientTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "variable",
        "coefficient",
        "exp(coefficient)",
        "SE(coefficient)",
        "CI lower 95%",
        "CI upper 95%",
        "p",
    ])?;
    let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in &table.rows {
        w.write_record([
            r.variable.clone(),
            f(r.coefficient),
            f(r.exp_coefficient),
            f(r.se),
            f(r.ci_lower),
            f(r.ci_upper),
            f(r.p),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
