use histokit::datastore::EmbeddingMatrix;
use histokit::knn::{auroc, predict_knn, repeated_eval, subsample_builder, KnnIndex, Metric};
use histokit::synthetic::{gaussian_blobs, random_centers};
use proptest::prelude::*;

fn brute_scores(reference: &EmbeddingMatrix, labels: &[bool], queries: &EmbeddingMatrix, k: usize) -> Vec<f64> {
    queries
        .rows()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = reference
                .rows()
                .enumerate()
                .map(|(r, x)| (x.iter().zip(q).map(|(a, b)| ((a - b) as f64).powi(2)).sum(), r))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d[..k].iter().filter(|(_, r)| labels[*r]).count() as f64 / k as f64
        })
        .collect()
}

fn pair_count_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (&si, _) in scores.iter().zip(labels).filter(|p| *p.1) {
        for (&sj, _) in scores.iter().zip(labels).filter(|p| !*p.1) {
            pairs += 1.0;
            wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
        }
    }
    wins / pairs
}

#[test]
fn ten_point_scan() {
    let pts: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32 * 1.5, (i % 3) as f32]).collect();
    let reference = EmbeddingMatrix::from_rows(&pts).unwrap();
    let labels = vec![true, true, false, true, false, false, true, false, true, false];
    let index = KnnIndex::new(reference.clone(), labels.clone(), Metric::Euclidean).unwrap();
    let q = EmbeddingMatrix::from_rows(&[[0.2f32, 0.4]]).unwrap();
    assert_eq!(predict_knn(&index, &q, 3).unwrap(), [2.0 / 3.0]);

    let grid: Vec<[f32; 2]> = (0..40).map(|i| [i as f32 * 0.37 - 1.0, (i % 5) as f32 * 0.6]).collect();
    let queries = EmbeddingMatrix::from_rows(&grid).unwrap();
    for k in 1..=10 {
        assert_eq!(predict_knn(&index, &queries, k).unwrap(), brute_scores(&reference, &labels, &queries, k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_on_grid(
        rows in proptest::collection::vec(proptest::collection::vec(-3.0f32..3.0, 3), 5..40),
        seed in any::<u64>(),
        k in 1usize..5,
    ) {
        let labels: Vec<bool> = (0..rows.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let x = EmbeddingMatrix::from_rows(&rows).unwrap();
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let index = KnnIndex::new(x.clone(), labels.clone(), metric).unwrap();
            for s in predict_knn(&index, &x, k).unwrap() {
                let steps = s * k as f64;
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!((steps - steps.round()).abs() < 1e-12);
            }
        }
    }
}

fn separable() -> (EmbeddingMatrix, Vec<bool>, EmbeddingMatrix, Vec<bool>) {
    let centers = random_centers(2, 6, 0.6, 41);
    let (reference, r) = gaussian_blobs(&centers, 300, 1.0, 42);
    let (query, q) = gaussian_blobs(&centers, 100, 1.0, 43);
    (reference, r.iter().map(|&c| c == 0).collect(), query, q.iter().map(|&c| c == 0).collect())
}

#[test]
fn full_reference_runs_repeat() {
    let (reference, labels, query, q_labels) = separable();
    let s = repeated_eval(subsample_builder(&reference, &labels, 1.0, Metric::Euclidean), &query, &q_labels, 20, 5, 9).unwrap();
    assert_eq!(s.auroc_runs.len(), 5);
    assert!(s.auroc_runs.iter().all(|&a| a == s.auroc_runs[0]));
    assert_eq!(s.auroc_std, 0.0);
}

#[test]
fn subsampled_mean_tracks_single_run_oracle() {
    let (reference, labels, query, q_labels) = separable();
    let oracle = pair_count_auroc(&brute_scores(&reference, &labels, &query, 20), &q_labels);
    let s = repeated_eval(subsample_builder(&reference, &labels, 0.8, Metric::Euclidean), &query, &q_labels, 20, 5, 3).unwrap();
    assert!((s.auroc_mean - oracle).abs() <= 0.01, "mean {} oracle {oracle}", s.auroc_mean);
    assert!(s.auroc_runs.iter().any(|&a| a != s.auroc_runs[0]), "runs should differ: {:?} oracle {oracle}", s.auroc_runs);
    assert_eq!(auroc(&brute_scores(&reference, &labels, &query, 20), &q_labels).unwrap(), oracle);
}
