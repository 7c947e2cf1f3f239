//! Kaplan-Meier product-limit estimation.
//!
//! The estimator is computed in its redistribute-to-the-right form: every
//! subject starts with unit mass, and a subject censored at `t` hands its mass
//! in equal shares to everyone still at risk after `t`. Survival just after
//! `t` is then the mass still at risk divided by `n`. This is algebraically the
//! product-limit estimator, and without censoring it reduces to the exact
//! count ratio `#{T > t} / n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous survival step function, `S(t) = 1` before the first time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Distinct observed times, ascending.
    pub times: Vec<f64>,
    /// Survival just after each time.
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub censored: Vec<usize>,
    n: usize,
    /// Surviving mass just after each time (`survival * n`).
    surviving_mass: Vec<f64>,
}

impl SurvivalCurve {
    /// `S(t)`: survival probability at `t` (right-continuous).
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }

    /// `S(t-)`: survival just before `t`.
    pub fn before(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s < t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }

    /// `S(t) * n`; an integer count whenever no censoring precedes `t`.
    pub fn surviving_mass_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => self.n as f64,
            i => self.surviving_mass[i - 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Product-limit estimate from right-censored data.
pub fn kaplan_meier(durations: &[f64], events: &[bool]) -> Result<SurvivalCurve> {
    if durations.is_empty() {
        return Err(Error::InvalidArgument("Kaplan-Meier needs at least one subject".into()));
    }
    if durations.len() != events.len() {
        return Err(Error::InvalidArgument(format!(
            "{} durations but {} event flags",
            durations.len(),
            events.len()
        )));
    }
    if let Some(i) = durations.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "duration {i} must be positive, got {}",
            durations[i]
        )));
    }
    let n = durations.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));

    let mut curve = SurvivalCurve {
        times: vec![],
        survival: vec![],
        at_risk: vec![],
        events: vec![],
        censored: vec![],
        n,
        surviving_mass: vec![],
    };
    let mut at_risk = n;
    // mass held by each subject still at risk, and by all of them together
    let mut mass = 1.0f64;
    let mut total = n as f64;
    let mut i = 0;
    while i < n {
        let t = durations[order[i]];
        let (mut d, mut c) = (0, 0);
        while i < n && durations[order[i]] == t {
            if events[order[i]] {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        let surviving = if d == at_risk {
            0.0
        } else {
            (total - d as f64 * mass).max(0.0)
        };
        curve.times.push(t);
        curve.at_risk.push(at_risk);
        curve.events.push(d);
        curve.censored.push(c);
        curve.surviving_mass.push(surviving);
        curve.survival.push(surviving / n as f64);
        let remaining = at_risk - d - c;
        if c > 0 && remaining > 0 {
            mass = surviving / remaining as f64;
        }
        total = surviving;
        at_risk = remaining;
    }
    Ok(curve)
}

/// Kaplan-Meier estimate of the censoring distribution `G(t) = P(C > t)`.
pub fn censoring_distribution(durations: &[f64], events: &[bool]) -> Result<SurvivalCurve> {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(durations, &flipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_events() {
        let c = kaplan_meier(&[1.0, 2.0, 3.0], &[true; 3]).unwrap();
        assert_eq!(c.survival, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(c.at(0.5), 1.0);
        assert_eq!(c.at(2.0), 1.0 / 3.0);
        assert_eq!(c.before(2.0), 2.0 / 3.0);
    }

    #[test]
    fn censored_middle() {
        let c = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert_eq!(c.at(1.0), 2.0 / 3.0);
        assert_eq!(c.at(2.0), 2.0 / 3.0);
        assert_eq!(c.at(3.0), 0.0);
        assert_eq!(c.at_risk, vec![3, 2, 1]);
    }

    #[test]
    fn no_events_is_flat() {
        let c = kaplan_meier(&[1.0, 4.0, 2.0], &[false; 3]).unwrap();
        assert!(c.survival.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn errors() {
        assert!(kaplan_meier(&[], &[]).is_err());
        assert!(kaplan_meier(&[0.0], &[true]).is_err());
    }

    #[test]
    fn matches_product_limit_with_ties() {
        let d = [2.0, 2.0, 3.0, 3.0, 3.0, 5.0, 7.0, 7.0, 8.0, 9.0];
        let e = [true, false, true, true, false, false, true, false, true, false];
        let c = kaplan_meier(&d, &e).unwrap();
        let mut s = 1.0;
        let expected: Vec<f64> = c
            .at_risk
            .iter()
            .zip(&c.events)
            .map(|(&r, &k)| {
                s *= 1.0 - k as f64 / r as f64;
                s
            })
            .collect();
        for (a, b) in c.survival.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn uncensored_equals_empirical(times in proptest::collection::vec(1u8..30, 1..40)) {
            let d: Vec<f64> = times.iter().map(|&t| t as f64).collect();
            let c = kaplan_meier(&d, &vec![true; d.len()]).unwrap();
            let n = d.len();
            for (&t, &s) in c.times.iter().zip(&c.survival) {
                let beyond = d.iter().filter(|&&x| x > t).count();
                prop_assert_eq!(s, beyond as f64 / n as f64);
            }
        }

        #[test]
        fn monotone_in_unit_interval(
            data in proptest::collection::vec((1u8..20, any::<bool>()), 1..50)
        ) {
            let d: Vec<f64> = data.iter().map(|x| x.0 as f64).collect();
            let e: Vec<bool> = data.iter().map(|x| x.1).collect();
            let c = kaplan_meier(&d, &e).unwrap();
            let mut prev = 1.0;
            for &s in &c.survival {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
                prop_assert!(s <= prev + 1e-12);
                prev = s;
            }
        }
    }
}
