use histokit::cohort::{build_design_matrix, ClusterFractions, CovariateSet, SplitSpec};
use histokit::datastore::{ClinicalRecord, ClinicalTable};
use histokit::survival::{
    breslow_baseline, cohort_event_probability, concordance, fit_coxph, head_to_head, kaplan_meier, net_benefit,
    time_dependent_auc, CoxData, CoxOptions, EvalGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `G(t-)` by direct product over distinct censoring times before `t`.
fn censoring_before(t: &[f64], e: &[bool], at: f64) -> f64 {
    let mut times: Vec<f64> = t.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .filter(|&s| s < at)
        .map(|s| {
            let at_risk = t.iter().filter(|&&x| x >= s).count() as f64;
            let censored = (0..t.len()).filter(|&i| t[i] == s && !e[i]).count() as f64;
            1.0 - censored / at_risk
        })
        .product()
}

fn td_auc_oracle(t: &[f64], e: &[bool], s: &[f64], at: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    let controls = t.iter().filter(|&&x| x > at).count() as f64;
    for i in (0..t.len()).filter(|&i| e[i] && t[i] <= at) {
        let w = 1.0 / censoring_before(t, e, t[i]);
        den += w * controls;
        for j in (0..t.len()).filter(|&j| t[j] > at) {
            if s[i] > s[j] {
                num += w;
            } else if s[i] == s[j] {
                num += 0.5 * w;
            }
        }
    }
    num / den
}

#[test]
fn td_auc_matches_weighted_pair_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let t: Vec<f64> = (0..12).map(|_| rng.random_range(1..10) as f64 + 0.5).collect();
        let e: Vec<bool> = (0..12).map(|_| rng.random_bool(0.6)).collect();
        let s: Vec<f64> = (0..12).map(|_| rng.random_range(0..5) as f64).collect();
        let grid: Vec<f64> = (1..=10).map(f64::from).collect();
        let td = time_dependent_auc(&t, &e, &s, &grid).unwrap();
        for &(at, auc) in &td.points {
            let want = td_auc_oracle(&t, &e, &s, at);
            assert!((auc - want).abs() <= 1e-10, "t={at}: {auc} vs {want}");
        }
        for &at in &td.skipped {
            let cases = (0..12).any(|i| e[i] && t[i] <= at);
            let controls = t.iter().any(|&x| x > at);
            assert!(!(cases && controls), "t={at} skipped with cases and controls");
        }
    }
}

#[test]
fn perfect_ordering_gives_unit_td_auc() {
    let t: Vec<f64> = (1..=30).map(|i| i as f64 * 0.8).collect();
    let s: Vec<f64> = t.iter().map(|x| -x).collect();
    let td = time_dependent_auc(&t, &[true; 30], &s, &[1.0, 5.0, 10.0, 20.0]).unwrap();
    assert!(td.points.iter().all(|p| p.1 == 1.0));
}

#[test]
fn breslow_is_a_nondecreasing_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let x: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(1..12) as f64).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
    let data = CoxData::new(&x, 2, &t, &e).unwrap();
    let beta = [0.7, -0.4];
    let h = breslow_baseline(&data, &beta).unwrap();
    let risk: Vec<f64> = (0..n).map(|i| (x[2 * i] * beta[0] + x[2 * i + 1] * beta[1]).exp()).collect();
    let mut cum = 0.0;
    for (k, &tk) in h.times.iter().enumerate() {
        let d = (0..n).filter(|&i| e[i] && t[i] == tk).count() as f64;
        let r: f64 = (0..n).filter(|&i| t[i] >= tk).map(|i| risk[i]).sum();
        cum += d / r;
        assert!((h.cumulative[k] - cum).abs() <= 1e-12);
        if k > 0 {
            assert!(h.cumulative[k] >= h.cumulative[k - 1]);
        }
    }
    assert_eq!(h.at(0.0), 0.0);
}

#[test]
fn risk_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 50;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..n).map(|i| 2.0 + rng.random_range(0.0..10.0) + 1e-6 * i as f64).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let data = CoxData::new(&x, 1, &t, &e).unwrap();
    let model = fit_coxph(&data, &CoxOptions::default()).unwrap();
    assert_eq!(model.predict_risk(&[0.3], 1.0).unwrap(), 0.0);
    let flat = fit_coxph(&data, &CoxOptions::penalized(1e3, 0.5)).unwrap();
    assert!(flat.coefficients[0].abs() <= 1e-8);
    let r: Vec<f64> = [-1.0, 0.0, 1.0].iter().map(|&v| flat.predict_risk(&[v], 8.0).unwrap()).collect();
    assert!(r.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-8));
    assert!(model.predict_risk(&[0.0, 1.0], 8.0).is_err());
    assert!(model.predict_risk(&[0.0], 0.0).is_err());
}

#[test]
fn net_benefit_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 80;
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..25.0)).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let risks: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let nb = net_benefit(&t, &e, &risks, 15.0, &[0.0, 0.1, 0.5]).unwrap();
    let p = cohort_event_probability(&t, &e, 15.0).unwrap();
    assert!((nb.treat_all[0] - p).abs() <= 1e-12);
    assert!(nb.model[0] <= nb.treat_all[0] + 1e-12);
    assert!(nb.treat_none.iter().all(|&v| v == 0.0));
    let zero = net_benefit(&t, &e, &vec![0.0; n], 15.0, &[0.1, 0.5]).unwrap();
    assert!(zero.model.iter().all(|&v| v == 0.0));
}

proptest! {
    #[test]
    fn concordance_rank_invariant(
        rows in proptest::collection::vec((1u8..20, any::<bool>(), -50i32..50), 2..60),
    ) {
        let t: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let e: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let s: Vec<f64> = rows.iter().map(|r| r.2 as f64).collect();
        let moved: Vec<f64> = s.iter().map(|v| (v / 10.0).exp() * 5.0 + 1.0).collect();
        match concordance(&t, &e, &s) {
            Ok(c) => {
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert_eq!(concordance(&t, &e, &moved).unwrap(), c);
            }
            Err(_) => prop_assert!(concordance(&t, &e, &moved).is_err()),
        }
    }

    #[test]
    fn km_is_a_survival_function(
        rows in proptest::collection::vec((1u8..30, any::<bool>()), 1..60),
    ) {
        let t: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let e: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let km = kaplan_meier(&t, &e).unwrap();
        prop_assert_eq!(km.at(0.0), 1.0);
        let mut last = 1.0;
        for &s in &km.survival {
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn efron_and_breslow_agree_without_ties(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 15;
        let x: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..n).map(|i| i as f64 + rng.random_range(0.1..0.9)).collect();
        let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        prop_assume!(e.iter().any(|&v| v));
        let data = CoxData::new(&x, 2, &t, &e).unwrap();
        let beta = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let a = histokit::survival::neg_log_partial_likelihood(&data, &beta, histokit::survival::Ties::Efron).unwrap();
        let b = histokit::survival::neg_log_partial_likelihood(&data, &beta, histokit::survival::Ties::Breslow).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn objective_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, p) = (120, 6);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..n).map(|i| rng.random_range(0.5..20.0) + 1e-7 * i as f64).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
    let data = CoxData::new(&x, p, &t, &e).unwrap();
    for opts in [
        CoxOptions::default(),
        CoxOptions {
            solver: histokit::survival::Solver::ProximalGradient,
            max_iter: 5000,
            ..CoxOptions::penalized(0.05, 0.5)
        },
    ] {
        let m = fit_coxph(&data, &opts).unwrap();
        let h = &m.convergence.objective_history;
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        assert!(m.convergence.subgradient_norm <= 1e-6);
        assert!(h.last().unwrap() <= &h[0]);
    }
}

fn cohort(n: usize, seed: u64) -> (ClinicalTable, Vec<ClusterFractions>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = vec![];
    let mut fractions = vec![];
    for i in 0..n {
        let f0 = rng.random_range(0.0..1.0);
        let capra = rng.random_range(0..10) as f64;
        let hazard = 0.02 * (0.2 * capra + 3.0 * f0).exp();
        let te = -rng.random_range(0.0f64..1.0).ln() / hazard;
        let tc = rng.random_range(5.0..25.0);
        records.push(ClinicalRecord {
            patient_id: format!("P{i:03}"),
            duration: te.min(tc),
            event: te <= tc,
            covariates: vec![Some(capra)],
        });
        fractions.push(ClusterFractions {
            patient_id: format!("P{i:03}"),
            fractions: vec![f0, 1.0 - f0],
            tile_count: 20,
        });
    }
    (ClinicalTable::new(vec!["capra_s".into()], records).unwrap(), fractions)
}

#[test]
fn head_to_head_reports_wins_and_curves() {
    let (clinical, fractions) = cohort(150, 21);
    let base = build_design_matrix(&clinical, &fractions, &[0], Some(CovariateSet::CapraS), false).unwrap();
    let aug = build_design_matrix(&clinical, &fractions, &[0], Some(CovariateSet::CapraS), true).unwrap();
    let spec = SplitSpec {
        n_splits: 40,
        seed: 4,
        ..SplitSpec::default()
    };
    let grid = EvalGrid::default();
    let r = head_to_head(&base, &aug, &spec, &CoxOptions::default(), &grid).unwrap();
    assert_eq!(r.evaluated_splits + r.failed_splits, 40);
    assert_eq!(r.wins, r.splits.iter().filter(|s| s.augmented_concordance > s.baseline_concordance).count());
    assert!(r.win_fraction > 0.6, "win fraction {}", r.win_fraction);
    assert!(r.augmented.td_auc.iter().all(|p| (1.0..=23.0).contains(&p.0)));
    assert_eq!(r.thresholds.len(), r.nb_treat_none.len());
    assert!(r.nb_treat_none.iter().all(|&v| v == 0.0));
    let same = head_to_head(&base, &base, &spec, &CoxOptions::default(), &grid).unwrap();
    assert_eq!(same.wins, 0);
}
