use std::collections::BTreeMap;

use histokit::clusterer::{
    adjusted_rand_index, assign, cluster_purity, fit_minibatch_kmeans, AnnotationTree, KMeansParams, ROOT,
};
use histokit::datastore::EmbeddingMatrix;
use histokit::synthetic::{gaussian_blobs, random_centers};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_matrix(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * dim).map(|_| rng.random_range(-5.0f32..5.0)).collect();
    EmbeddingMatrix::new(n, dim, values).unwrap()
}

fn brute_nearest(centroids: &[f64], dim: usize, row: &[f32]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.chunks(dim).enumerate() {
        let d: f64 = cen.iter().zip(row).map(|(a, &b)| (a - b as f64).powi(2)).sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assign_matches_exhaustive_scan(seed in any::<u64>(), k in 1usize..12, dim in 1usize..6) {
        let train = random_matrix(120, dim, seed);
        let model = fit_minibatch_kmeans(&train, &KMeansParams::new(k).seed(seed).batch_size(32)).unwrap();
        let x = random_matrix(100, dim, seed ^ 1);
        let got = assign(&model, &x).unwrap();
        for (i, row) in x.rows().enumerate() {
            prop_assert_eq!(got[i], brute_nearest(&model.centroids, dim, row));
        }
    }

    #[test]
    fn frontier_partitions_root(seed in any::<u64>()) {
        let x = random_matrix(90, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = AnnotationTree::new(90);
        for step in 0..12 {
            let (_, leaves) = tree.frontier();
            let ids: Vec<_> = tree.nodes().map(|n| n.node_id).collect();
            if rng.random_bool(0.5) && !leaves.is_empty() {
                let node = leaves[rng.random_range(0..leaves.len())];
                let _ = tree.split_node(&x, node, rng.random_range(2..4), step, "p");
            } else {
                let node = ids[rng.random_range(0..ids.len())];
                let _ = tree.label_node(node, ["a", "b"][step as usize % 2], "p");
            }
            let (labeled, unlabeled) = tree.frontier();
            let mut rows: Vec<usize> = labeled
                .iter()
                .chain(&unlabeled)
                .flat_map(|id| tree.node(*id).unwrap().member_rows.clone())
                .collect();
            rows.sort_unstable();
            prop_assert_eq!(rows, (0..90).collect::<Vec<_>>());
            tree.validate().unwrap();
        }
    }
}

#[test]
fn inertia_settles_monotonically() {
    let centers = random_centers(5, 8, 6.0, 11);
    let (x, _) = gaussian_blobs(&centers, 400, 1.0, 12);
    let params = KMeansParams {
        batch_size: 100,
        max_iters: 400,
        tol: 0.0,
        record_checkpoints: true,
        ..KMeansParams::new(5).seed(3)
    };
    let model = fit_minibatch_kmeans(&x, &params).unwrap();
    let cp = &model.checkpoints;
    assert!(cp.len() >= 10, "{} checkpoints", cp.len());
    // per-center rates 1/count have decayed after the first passes
    for w in cp[2..].windows(2) {
        assert!(
            w[1].inertia <= w[0].inertia * (1.0 + 1e-6),
            "inertia rose from {} to {} at iteration {}",
            w[0].inertia,
            w[1].inertia,
            w[1].iteration
        );
    }
}

#[test]
fn split_separates_planted_sub_blobs() {
    // two close sub-blobs far away from a third group
    let centers = vec![vec![0.0f32; 4], vec![10.0, 0.0, 0.0, 0.0], vec![0.0, 100.0, 0.0, 0.0]];
    let (x, planted) = gaussian_blobs(&centers, 150, 1.0, 21);
    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(2).seed(1)).unwrap();
    let a = assign(&model, &x).unwrap();
    let mut tree = AnnotationTree::from_clustering(model, &a);
    let (_, leaves) = tree.frontier();
    let node = *leaves.iter().find(|&&n| tree.node(n).unwrap().size() == 300).unwrap();
    let kids = tree.split_node(&x, node, 2, 4, "test").unwrap();
    let members = tree.node(node).unwrap().member_rows.clone();
    let truth: Vec<usize> = members.iter().map(|&r| planted[r]).collect();
    let found: Vec<usize> = members
        .iter()
        .map(|r| kids.iter().position(|k| tree.node(*k).unwrap().member_rows.binary_search(r).is_ok()).unwrap())
        .collect();
    assert!(truth.iter().all(|&t| t < 2));
    let ari = adjusted_rand_index(&truth, &found);
    assert!(ari >= 0.99, "ari {ari}");
}

fn sample_counts(members: usize, m: usize, draws: u64) -> Vec<usize> {
    let tree = AnnotationTree::new(members);
    let mut hits = vec![0usize; members];
    for seed in 0..draws {
        for r in tree.sample_tiles(ROOT, m, seed).unwrap() {
            hits[r] += 1;
        }
    }
    hits
}

#[test]
fn sampling_is_uniform() {
    let draws = 10_000;
    let p = 8.0 / 20.0;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (r, &h) in sample_counts(20, 8, draws).iter().enumerate() {
        assert!((h as f64 - mean).abs() <= 3.0 * sigma, "row {r} drawn {h} times");
    }

    // over many members, judge the whole histogram instead of each row
    let hits = sample_counts(100, 8, draws);
    let expected = draws as f64 * 0.08;
    let chi2: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    assert!(ChiSquared::new(99.0).unwrap().cdf(chi2) < 0.999, "chi2 {chi2}");
}

#[test]
fn majority_export_accuracy_is_weighted_purity() {
    let centers = random_centers(6, 5, 2.5, 31);
    let (x, planted) = gaussian_blobs(&centers, 100, 1.0, 32);
    let truth: Vec<Option<String>> = planted.iter().map(|&c| Some(["tumor", "benign"][c % 2].to_string())).collect();
    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(8).seed(2)).unwrap();
    let a = assign(&model, &x).unwrap();
    let mut tree = AnnotationTree::from_clustering(model, &a);
    tree.compute_purity(&truth).unwrap();
    let (_, leaves) = tree.frontier();
    for id in leaves {
        let majority = tree.node(id).unwrap().majority_label.clone().unwrap();
        tree.label_node(id, &majority, "test").unwrap();
    }
    let rows = tree.export_annotations();
    let correct = rows.iter().filter(|r| r.label == truth[r.row]).count();

    // recompute from label counts per cluster
    let mut counts: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    for (c, t) in a.iter().zip(&truth) {
        *counts.entry((*c, t.as_deref().unwrap())).or_default() += 1;
    }
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for ((c, _), n) in counts {
        let b = best.entry(c).or_default();
        *b = (*b).max(n);
    }
    assert_eq!(correct, best.values().sum::<usize>());
    assert!(correct < rows.len(), "planted labels should be mixed");

    let report = cluster_purity(&a, &truth).unwrap();
    let weighted: f64 = report
        .clusters
        .iter()
        .filter_map(|c| c.purity.map(|p| p * c.labeled as f64))
        .sum::<f64>()
        / rows.len() as f64;
    assert!((weighted - correct as f64 / rows.len() as f64).abs() < 1e-12);
}

#[test]
fn saved_tree_reloads_identically() {
    let x = random_matrix(200, 7, 8);
    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(5).seed(8)).unwrap();
    let a = assign(&model, &x).unwrap();
    let mut tree = AnnotationTree::from_clustering(model, &a);
    let leaf = tree.frontier().1[0];
    tree.split_node(&x, leaf, 3, 1, "test").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.json");
    tree.save(&path).unwrap();
    assert_eq!(AnnotationTree::load(&path).unwrap(), tree);
}
