//! Decision-curve analysis: net benefit of a risk model against treating
//! everyone or no one, with censoring handled by Kaplan-Meier.
//!
//! ```bash
//! cargo run --example decision_curve
//! ```

use histokit::survival::{cohort_event_probability, net_benefit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

fn main() -> histokit::Result<()> {
    let horizon = 5.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut durations, mut events, mut risks) = (vec![], vec![], vec![]);
    for _ in 0..500 {
        let z: f64 = rng.sample(StandardNormal);
        let hazard = 0.06 * (0.9 * z).exp();
        let t = Exp::new(hazard).unwrap().sample(&mut rng);
        let c = rng.random_range(2.0..15.0);
        durations.push(t.min(c));
        events.push(t <= c);
        // the model's risk at the horizon
        risks.push(1.0 - (-hazard * horizon).exp());
    }
    println!("event probability by year {horizon}: {:.3}", cohort_event_probability(&durations, &events, horizon)?);

    let thresholds: Vec<f64> = (1..=12).map(|i| i as f64 * 0.05).collect();
    let nb = net_benefit(&durations, &events, &risks, horizon, &thresholds)?;
    println!("{:>9} {:>9} {:>9} {:>9}", "threshold", "model", "all", "none");
    for i in 0..nb.thresholds.len() {
        println!(
            "{:>9.2} {:>9.4} {:>9.4} {:>9.4}",
            nb.thresholds[i], nb.model[i], nb.treat_all[i], nb.treat_none[i]
        );
    }
    Ok(())
}
