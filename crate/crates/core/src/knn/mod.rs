//! Training-free classifier evaluation: exact k-nearest-neighbour scoring and
//! AUROC with repeated-run summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Rows are L2-normalized; distance is `1 - cos`.
    #[default]
    Cosine,
    /// Squared Euclidean distance on raw features.
    Euclidean,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Reference embeddings with binary labels, immutable once built.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    reference: EmbeddingMatrix,
    labels: Vec<bool>,
    metric: Metric,
}

impl KnnIndex {
    pub fn new(reference: EmbeddingMatrix, labels: Vec<bool>, metric: Metric) -> Result<Self> {
        if labels.len() != reference.n_rows() {
            return Err(Error::RowCountMismatch {
                left: reference.n_rows(),
                right: labels.len(),
            });
        }
        let reference = match metric {
            Metric::Cosine => reference.l2_normalized(),
            Metric::Euclidean => reference,
        };
        Ok(Self {
            reference,
            labels,
            metric,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// Reference rows as stored (normalized for the cosine metric).
    pub fn reference(&self) -> &EmbeddingMatrix {
        &self.reference
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Distance between a prepared query row and reference row `r`.
    #[inline]
    pub fn distance(&self, query: &[f32], r: usize) -> f64 {
        let row = self.reference.row(r);
        match self.metric {
            Metric::Cosine => 1.0 - row.iter().zip(query).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>(),
            Metric::Euclidean => row
                .iter()
                .zip(query)
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum(),
        }
    }

    /// Applies the metric's query-side preprocessing.
    pub fn prepare_queries(&self, queries: &EmbeddingMatrix) -> EmbeddingMatrix {
        match self.metric {
            Metric::Cosine => queries.l2_normalized(),
            Metric::Euclidean => queries.clone(),
        }
    }
}

/// Fraction of positive labels among the `k` nearest references of each query.
/// Ties at the k-th distance go to the lower reference index.
pub fn predict_knn(index: &KnnIndex, queries: &EmbeddingMatrix, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > index.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={} (reference count), got {k}",
            index.len()
        )));
    }
    if queries.n_rows() > 0 && queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: queries.dim(),
        });
    }
    let q = index.prepare_queries(queries);
    Ok((0..q.n_rows())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(index.len()),
            |buf: &mut Vec<(f64, usize)>, i| {
                let row = q.row(i);
                buf.clear();
                buf.extend((0..index.len()).map(|r| (index.distance(row, r), r)));
                let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < buf.len() {
                    buf.select_nth_unstable_by(k - 1, by_key);
                }
                let positives = buf[..k].iter().filter(|&&(_, r)| index.labels[r]).count();
                positives as f64 / k as f64
            },
        )
        .collect())
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUROC needs at least one positive and one negative".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (doubled) midranks of positives, kept integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, midrank*2 = i+j+2
        let mid2 = (i + j + 2) as u128;
        let p = order[i..=j].iter().filter(|&&o| labels[o]).count() as u128;
        rank_sum2 += p * mid2;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * p as f64 * n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub k: usize,
    pub runs: usize,
    pub auroc_mean: f64,
    /// Sample standard deviation (0 for a single run).
    pub auroc_std: f64,
    pub auroc_runs: Vec<f64>,
    pub seed: u64,
}

impl EvalSummary {
    pub fn from_runs(k: usize, seed: u64, aurocs: Vec<f64>) -> Self {
        use statrs::statistics::Statistics;
        let n = aurocs.len();
        let mean = if n > 0 { aurocs.iter().mean() } else { f64::NAN };
        let std = if n > 1 { aurocs.iter().std_dev() } else { 0.0 };
        Self {
            k,
            runs: n,
            auroc_mean: mean,
            auroc_std: std,
            auroc_runs: aurocs,
            seed,
        }
    }
}

/// Per-run seed derived from the base seed.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Builds an index per run via `build(run, run_seed)` and scores the same
/// evaluation set with it.
pub fn repeated_eval<F>(
    mut build: F,
    eval: &EmbeddingMatrix,
    eval_labels: &[bool],
    k: usize,
    runs: usize,
    seed: u64,
) -> Result<EvalSummary>
where
    F: FnMut(usize, u64) -> Result<KnnIndex>,
{
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let mut aurocs = Vec::with_capacity(runs);
    for run in 0..runs {
        let index = build(run, run_seed(seed, run))?;
        let scores = predict_knn(&index, eval, k)?;
        aurocs.push(auroc(&scores, eval_labels)?);
    }
    Ok(EvalSummary::from_runs(k, seed, aurocs))
}

/// Index builder that keeps a uniform `fraction` of the reference rows per run.
pub fn subsample_builder<'a>(
    reference: &'a EmbeddingMatrix,
    labels: &'a [bool],
    fraction: f64,
    metric: Metric,
) -> impl FnMut(usize, u64) -> Result<KnnIndex> + 'a {
    move |_, seed| {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("subsample fraction {fraction} not in (0, 1]")));
        }
        let n = reference.n_rows();
        let m = ((n as f64 * fraction).round() as usize).clamp(1, n);
        let mut rows = if m == n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, m).into_vec()
        };
        rows.sort_unstable();
        KnnIndex::new(
            reference.select_rows(&rows),
            rows.iter().map(|&r| labels[r]).collect(),
            metric,
        )
    }
}
