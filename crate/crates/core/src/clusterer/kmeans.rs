//! Mini-batch k-means with per-center learning rates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Default cluster count for cohort (cluster-fraction) workflows.
pub const DEFAULT_COHORT_K: usize = 32;
/// Default cluster count for dataset annotation.
pub const DEFAULT_ANNOTATION_K: usize = 256;
pub const DEFAULT_BATCH_SIZE: usize = 1024;
pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub batch_size: usize,
    /// Number of mini-batches to process at most.
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the moving average of per-batch centroid displacement drops
    /// below `tol` times the data diameter.
    pub tol: f64,
    /// k-means++ runs on at most `init_oversampling * k` rows.
    pub init_oversampling: usize,
    /// Record full-data inertia at every pass boundary.
    pub record_checkpoints: bool,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_COHORT_K,
            batch_size: DEFAULT_BATCH_SIZE,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            tol: 1e-4,
            init_oversampling: 100,
            record_checkpoints: false,
        }
    }
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub inertia: f64,
}

/// Fitted centroids plus training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k × dim`.
    pub centroids: Vec<f64>,
    /// Sum of squared distances of every training row to its assigned centroid.
    pub inertia: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub iterations_run: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<Checkpoint>,
}

impl ClusterModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Nearest centroid for one row; ties go to the lowest index.
    pub fn nearest(&self, row: &[f32]) -> (usize, f64) {
        nearest(&self.centroids, self.dim, row)
    }
}

#[inline]
pub(crate) fn sq_dist(row: &[f32], centroid: &[f64]) -> f64 {
    row.iter()
        .zip(centroid)
        .map(|(&x, &c)| {
            let d = x as f64 - c;
            d * d
        })
        .sum()
}

#[inline]
fn nearest(centroids: &[f64], dim: usize, row: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Maps each row of `x` to its nearest centroid (squared Euclidean).
pub fn assign(model: &ClusterModel, x: &EmbeddingMatrix) -> Result<Vec<usize>> {
    if x.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: x.dim(),
        });
    }
    Ok(assign_with_dist(&model.centroids, model.dim, x).0)
}

fn assign_with_dist(centroids: &[f64], dim: usize, x: &EmbeddingMatrix) -> (Vec<usize>, Vec<f64>) {
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| nearest(centroids, dim, x.row(i)))
        .unzip()
}

fn inertia_of(centroids: &[f64], dim: usize, x: &EmbeddingMatrix) -> f64 {
    assign_with_dist(centroids, dim, x).1.iter().sum()
}

/// k-means++ seeding over the given candidate rows. Returns row-major centroids.
pub fn kmeans_plus_plus<R: Rng>(x: &EmbeddingMatrix, candidates: &[usize], k: usize, rng: &mut R) -> Vec<f64> {
    let dim = x.dim();
    let m = candidates.len();
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; m];
    let first = rng.random_range(0..m);
    chosen[first] = true;
    centroids.extend(x.row(candidates[first]).iter().map(|&v| v as f64));
    let mut d2: Vec<f64> = candidates
        .iter()
        .map(|&r| sq_dist(x.row(r), &centroids[0..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can leave target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..m).filter(|&i| !chosen[i]).collect();
            if free.is_empty() {
                rng.random_range(0..m)
            } else {
                free[rng.random_range(0..free.len())]
            }
        };
        chosen[pick] = true;
        let start = centroids.len();
        centroids.extend(x.row(candidates[pick]).iter().map(|&v| v as f64));
        let c = &centroids[start..];
        for (w, &r) in d2.iter_mut().zip(candidates) {
            let d = sq_dist(x.row(r), c);
            if d < *w {
                *w = d;
            }
        }
    }
    centroids
}

/// Uniform subsample of `min(n, oversampling * k)` row indices, sorted.
pub fn init_candidates<R: Rng>(n: usize, k: usize, oversampling: usize, rng: &mut R) -> Vec<usize> {
    let m = n.min(oversampling.saturating_mul(k).max(k));
    if m >= n {
        (0..n).collect()
    } else {
        let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
        idx.sort_unstable();
        idx
    }
}

fn diameter(x: &EmbeddingMatrix, rows: &[usize]) -> f64 {
    let dim = x.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &r in rows {
        for (j, &v) in x.row(r).iter().enumerate() {
            lo[j] = lo[j].min(v as f64);
            hi[j] = hi[j].max(v as f64);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
}

/// Moves centers that captured no candidate row onto the candidates farthest
/// from their own centroid.
fn reseed_starved(x: &EmbeddingMatrix, candidates: &[usize], centroids: &mut [f64], k: usize) {
    let dim = x.dim();
    let assigned: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&r| nearest(centroids, dim, x.row(r)))
        .collect();
    let mut counts = vec![0usize; k];
    for &(c, _) in &assigned {
        counts[c] += 1;
    }
    let starved: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if starved.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
    for (c, &i) in starved.iter().zip(&order) {
        let row = x.row(candidates[i]);
        for (dst, &v) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(row) {
            *dst = v as f64;
        }
    }
}

/// Fits mini-batch k-means; deterministic for a given input and parameter set.
pub fn fit_minibatch_kmeans(x: &EmbeddingMatrix, params: &KMeansParams) -> Result<ClusterModel> {
    let n = x.n_rows();
    let dim = x.dim();
    let k = params.k;
    if n == 0 {
        return Err(Error::InvalidArgument("cannot cluster an empty matrix".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k must be in 1..={n}, got {k}")));
    }
    if params.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let candidates = init_candidates(n, k, params.init_oversampling, &mut rng);
    let mut centroids = kmeans_plus_plus(x, &candidates, k, &mut rng);
    reseed_starved(x, &candidates, &mut centroids, k);
    let threshold = params.tol * diameter(x, &candidates);

    let mut counts = vec![0u64; k];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut pos = 0;
    let mut moving_avg: Option<f64> = None;
    let mut checkpoints = Vec::new();
    let mut iterations_run = 0;
    let mut previous = centroids.clone();

    while iterations_run < params.max_iters {
        let end = (pos + params.batch_size).min(n);
        let batch = &order[pos..end];
        let nearest_of: Vec<usize> = batch
            .par_iter()
            .map(|&r| nearest(&centroids, dim, x.row(r)).0)
            .collect();
        previous.copy_from_slice(&centroids);
        for (&r, &c) in batch.iter().zip(&nearest_of) {
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            for (cv, &xv) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(x.row(r)) {
                *cv += eta * (xv as f64 - *cv);
            }
        }
        iterations_run += 1;

        let displacement = centroids
            .chunks_exact(dim)
            .zip(previous.chunks_exact(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let avg = match moving_avg {
            None => displacement,
            Some(m) => 0.7 * m + 0.3 * displacement,
        };
        moving_avg = Some(avg);

        pos = end;
        if pos == n {
            pos = 0;
            if params.record_checkpoints {
                checkpoints.push(Checkpoint {
                    iteration: iterations_run,
                    inertia: inertia_of(&centroids, dim, x),
                });
            }
            order.shuffle(&mut rng);
        }
        if avg < threshold {
            break;
        }
    }

    // one full-data mean update; never increases inertia
    let (labels, _) = assign_with_dist(&centroids, dim, x);
    let mut sums = vec![0.0f64; k * dim];
    let mut sizes = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x.row(i)) {
            *s += v as f64;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            for j in 0..dim {
                centroids[c * dim + j] = sums[c * dim + j] / sizes[c] as f64;
            }
        }
    }
    let inertia = inertia_of(&centroids, dim, x);
    if params.record_checkpoints {
        checkpoints.push(Checkpoint {
            iteration: iterations_run,
            inertia,
        });
    }

    Ok(ClusterModel {
        k,
        dim,
        centroids,
        inertia,
        seed: params.seed,
        batch_size: params.batch_size,
        iterations_run,
        checkpoints,
    })
}

/// Adjusted Rand index between two partitions of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions must cover the same items");
    let n = a.len() as f64;
    let mut table = std::collections::HashMap::<(usize, usize), f64>::new();
    let mut rows = std::collections::HashMap::<usize, f64>::new();
    let mut cols = std::collections::HashMap::<usize, f64>::new();
    for (&i, &j) in a.iter().zip(b) {
        *table.entry((i, j)).or_default() += 1.0;
        *rows.entry(i).or_default() += 1.0;
        *cols.entry(j).or_default() += 1.0;
    }
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = rows.values().map(|&v| c2(v)).sum();
    let sb: f64 = cols.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, dim: usize, sep: f64, seed: u64) -> (EmbeddingMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for b in 0..3 {
            for _ in 0..per {
                let row: Vec<f32> = (0..dim)
                    .map(|j| (if j == b { sep } else { 0.0 } + noise.sample(&mut rng)) as f32)
                    .collect();
                rows.push(row);
                truth.push(b);
            }
        }
        (EmbeddingMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let (x, _) = blobs(5, 4, 10.0, 1);
        let m = fit_minibatch_kmeans(&x, &KMeansParams::new(x.n_rows()).batch_size(4)).unwrap();
        assert_eq!(m.inertia, 0.0);
        let a = assign(&m, &x).unwrap();
        let mut seen = a.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), x.n_rows());
    }

    #[test]
    fn k_one_is_column_mean() {
        let (x, _) = blobs(50, 8, 10.0, 2);
        let m = fit_minibatch_kmeans(&x, &KMeansParams::new(1).batch_size(16).max_iters(7)).unwrap();
        for (c, mu) in m.centroid(0).iter().zip(x.column_mean()) {
            assert!((c - mu).abs() < 1e-5, "{c} vs {mu}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let (x, _) = blobs(100, 8, 10.0, 3);
        let p = KMeansParams::new(3).batch_size(32).seed(9);
        assert_eq!(fit_minibatch_kmeans(&x, &p).unwrap(), fit_minibatch_kmeans(&x, &p).unwrap());
    }

    #[test]
    fn rejects_bad_k() {
        let (x, _) = blobs(2, 2, 1.0, 4);
        assert!(fit_minibatch_kmeans(&x, &KMeansParams::new(7)).is_err());
        assert!(fit_minibatch_kmeans(&x, &KMeansParams::new(0)).is_err());
        let empty = EmbeddingMatrix::new(0, 2, vec![]).unwrap();
        assert!(fit_minibatch_kmeans(&empty, &KMeansParams::new(1)).is_err());
    }

    #[test]
    fn assign_ties_and_exact_hits() {
        let model = ClusterModel {
            k: 4,
            dim: 2,
            centroids: vec![-1.0, 0.0, 5.0, 5.0, 3.0, 3.0, 1.0, 0.0],
            inertia: 0.0,
            seed: 0,
            batch_size: 1,
            iterations_run: 0,
            checkpoints: vec![],
        };
        let x = EmbeddingMatrix::from_rows(&[[3.0f32, 3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(assign(&model, &x).unwrap(), vec![2, 0]);
        let bad = EmbeddingMatrix::from_rows(&[[0.0f32; 3]]).unwrap();
        assert!(matches!(assign(&model, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!(v < 0.0);
    }
}
