//! Training-free evaluation of embeddings: exact KNN scores and AUROC over
//! repeated reference subsamples.
//!
//! ```bash
//! cargo run --release --example knn_eval
//! ```

use histokit::knn::{auroc, predict_knn, repeated_eval, subsample_builder, KnnIndex, Metric};
use histokit::synthetic::{gaussian_blobs, random_centers};

fn main() -> histokit::Result<()> {
    let centers = random_centers(2, 32, 0.2, 1);
    let (reference, r) = gaussian_blobs(&centers, 2000, 1.0, 2);
    let (query, q) = gaussian_blobs(&centers, 400, 1.0, 3);
    let ref_labels: Vec<bool> = r.iter().map(|&c| c == 1).collect();
    let q_labels: Vec<bool> = q.iter().map(|&c| c == 1).collect();

    for metric in [Metric::Cosine, Metric::Euclidean] {
        let index = KnnIndex::new(reference.clone(), ref_labels.clone(), metric)?;
        let scores = predict_knn(&index, &query, 20)?;
        println!("{metric:?}: single run AUROC {:.4}", auroc(&scores, &q_labels)?);
    }

    let summary = repeated_eval(
        subsample_builder(&reference, &ref_labels, 0.8, Metric::Cosine),
        &query,
        &q_labels,
        20,
        5,
        42,
    )?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}
