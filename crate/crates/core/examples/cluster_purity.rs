//! Mini-batch k-means on labeled blobs, then per-cluster purity and the
//! coverage sweep over k.
//!
//! ```bash
//! cargo run --release --example cluster_purity
//! ```

use histokit::clusterer::{
    adjusted_rand_index, assign, cluster_purity, fit_minibatch_kmeans, purity_coverage_sweep, KMeansParams,
};
use histokit::synthetic::{gaussian_blobs, random_centers};

fn main() -> histokit::Result<()> {
    let centers = random_centers(6, 16, 2.0, 7);
    let (x, planted) = gaussian_blobs(&centers, 500, 1.0, 8);
    // three blobs per label, so clusters can be pure without matching blobs
    let labels: Vec<Option<String>> = planted.iter().map(|&c| Some(["tumor", "stroma"][c % 2].into())).collect();

    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(6).seed(1).batch_size(256))?;
    let a = assign(&model, &x)?;
    println!(
        "k=6: inertia {:.1} after {} batches, ARI vs planted {:.3}",
        model.inertia,
        model.iterations_run,
        adjusted_rand_index(&planted, &a)
    );

    let report = cluster_purity(&a, &labels)?;
    for c in &report.clusters {
        println!(
            "  cluster {:>2}: {:>4} tiles, majority {:<6} purity {:.3}",
            c.cluster,
            c.size,
            c.majority_label.as_deref().unwrap_or("-"),
            c.purity.unwrap_or(f64::NAN)
        );
    }

    let clusterings = [2, 4, 8, 16, 32]
        .into_iter()
        .map(|k| {
            let m = fit_minibatch_kmeans(&x, &KMeansParams::new(k).seed(1).batch_size(256))?;
            Ok((k, assign(&m, &x)?))
        })
        .collect::<histokit::Result<Vec<_>>>()?;
    println!("coverage at tau = 0.9:");
    for row in purity_coverage_sweep(&clusterings, &labels, 0.9)? {
        println!("  k={:<3} coverage {:.3} ({} pure clusters)", row.k, row.coverage, row.pure_clusters);
    }
    Ok(())
}
