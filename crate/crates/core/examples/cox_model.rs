//! Elastic-net Cox regression on simulated data: fit with both solvers,
//! print the coefficient table and predict risks from the Breslow baseline.
//!
//! ```bash
//! cargo run --release --example cox_model
//! ```

use histokit::survival::{coefficient_table, fit_coxph, CoxData, CoxOptions, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

fn main() -> histokit::Result<()> {
    let (n, p) = (400, 4);
    let truth = [0.8, -0.5, 0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = Vec::with_capacity(n * p);
    let mut durations = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let eta: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let t = Exp::new(0.1 * eta.exp()).unwrap().sample(&mut rng);
        let c = rng.random_range(2.0..20.0);
        durations.push(t.min(c));
        events.push(t <= c);
        x.extend(row);
    }
    let data = CoxData::new(&x, p, &durations, &events)?;
    println!("{} subjects, {} events", data.n(), data.n_events());

    for solver in [Solver::ProximalNewton, Solver::ProximalGradient] {
        let opts = CoxOptions {
            solver,
            max_iter: 5000,
            ..CoxOptions::penalized(0.05, 0.5)
        };
        let m = fit_coxph(&data, &opts)?;
        println!(
            "{solver:?}: {} iterations, objective {:.6}, beta {:.4?}",
            m.convergence.iterations, m.convergence.objective, m.coefficients
        );
    }

    let model = fit_coxph(&data, &CoxOptions::penalized(0.0, 0.0))?;
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let table = coefficient_table(&model, &data, &names, &[])?;
    println!("\n{:<4} {:>8} {:>8} {:>7} {:>17} {:>9}", "", "coef", "exp", "se", "95% CI", "p");
    for r in &table.rows {
        let f = |v: Option<f64>| v.unwrap_or(f64::NAN);
        println!(
            "{:<4} {:>8.4} {:>8.4} {:>7.4} [{:>7.3}, {:>7.3}] {:>9.2e}",
            r.variable,
            f(r.coefficient),
            f(r.exp_coefficient),
            f(r.se),
            f(r.ci_lower),
            f(r.ci_upper),
            f(r.p)
        );
    }
    println!("concordance {:.3}", table.concordance);

    for profile in [[1.0, -1.0, 0.0, 0.0], [0.0; 4], [-1.0, 1.0, 0.0, 0.0]] {
        println!("5-year risk at {profile:?}: {:.3}", model.predict_risk(&profile, 5.0)?);
    }
    Ok(())
}
