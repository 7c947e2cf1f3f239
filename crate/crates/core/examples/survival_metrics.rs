//! Kaplan-Meier curves, Harrell's concordance and the IPCW time-dependent
//! AUC for a noisy risk score.
//!
//! ```bash
//! cargo run --example survival_metrics
//! ```

use histokit::survival::{concordance, default_auc_times, kaplan_meier, time_dependent_auc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

fn main() -> histokit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut durations = vec![];
    let mut events = vec![];
    let mut scores = vec![];
    for _ in 0..300 {
        let z: f64 = rng.sample(StandardNormal);
        let t = Exp::new(0.08 * z.exp()).unwrap().sample(&mut rng);
        let c = rng.random_range(3.0..25.0);
        durations.push(t.min(c));
        events.push(t <= c);
        // the score sees the true risk through noise
        scores.push(z + 0.7 * rng.sample::<f64, _>(StandardNormal));
    }

    let km = kaplan_meier(&durations, &events)?;
    for t in [1.0, 2.0, 5.0, 10.0, 15.0] {
        println!("S({t:>4}) = {:.3}", km.at(t));
    }

    println!("concordance {:.3}", concordance(&durations, &events, &scores)?);
    let auc = time_dependent_auc(&durations, &events, &scores, &default_auc_times())?;
    for (t, a) in &auc.points {
        println!("AUC({t:>4}) = {a:.3}");
    }
    if !auc.skipped.is_empty() {
        println!("skipped times without cases or controls: {:?}", auc.skipped);
    }
    println!("mean td-AUC {:.3}", auc.mean().unwrap_or(f64::NAN));
    Ok(())
}
