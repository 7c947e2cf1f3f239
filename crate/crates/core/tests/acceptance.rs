//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails.
//!
//! Every expected value is produced by an oracle written here, independently
//! of the library code under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use histokit::clusterer::{assign, cluster_purity, fit_minibatch_kmeans, KMeansParams, DEFAULT_PURITY_THRESHOLD};
use histokit::cohort::{cluster_fractions, CovariateSet, SplitSpec};
use histokit::datastore::EmbeddingMatrix;
use histokit::knn::{auroc, predict_knn, KnnIndex, Metric};
use histokit::survival::{
    concordance, fit_coxph, kaplan_meier, net_benefit, neg_log_partial_likelihood, time_dependent_auc, CoxData,
    CoxOptions, Ties,
};
use histokit::synthetic::{gaussian_blobs, random_centers, synthetic_cohort, CohortParams};
use histokit::workflow::{run_survival_workflow, WorkflowParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:.2?}, limit {limit:?}"))
    }
}

// ---------------------------------------------------------------- oracles

fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / c2(a.len() as u64);
    let max = 0.5 * (rows + cols);
    (index - expected) / (max - expected)
}

fn nearest_oracle(centroids: &[f64], dim: usize, row: &[f32]) -> usize {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.len() / dim {
        let mut d = 0.0;
        for j in 0..dim {
            let diff = row[j] as f64 - centroids[c * dim + j];
            d += diff * diff;
        }
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Full sort of all reference distances per query.
fn knn_oracle(index: &KnnIndex, queries: &EmbeddingMatrix, k: usize) -> Vec<f64> {
    let q = index.prepare_queries(queries);
    let r = index.reference();
    (0..q.n_rows())
        .map(|i| {
            let qi = q.row(i);
            let mut d: Vec<(f64, usize)> = (0..r.n_rows())
                .map(|j| {
                    let rj = r.row(j);
                    let v = match index.metric() {
                        Metric::Cosine => 1.0 - rj.iter().zip(qi).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>(),
                        Metric::Euclidean => rj
                            .iter()
                            .zip(qi)
                            .map(|(&a, &b)| (a as f64 - b as f64) * (a as f64 - b as f64))
                            .sum(),
                    };
                    (v, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d[..k].iter().filter(|(_, j)| index.labels()[*j]).count() as f64 / k as f64
        })
        .collect()
}

/// Positive-negative pairs won by the positive, ties counting one half.
fn auroc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        for j in (0..scores.len()).filter(|&j| !labels[j]) {
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn concordance_oracle(t: &[f64], e: &[bool], s: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..t.len() {
        for j in 0..t.len() {
            // i is the subject known to fail first
            let comparable = e[i] && (t[i] < t[j] || (t[i] == t[j] && !e[j]));
            if comparable {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn efron_nll_oracle(x: &[f64], p: usize, t: &[f64], e: &[bool], beta: &[f64]) -> f64 {
    let n = t.len();
    let eta: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[i * p + j] * beta[j]).sum()).collect();
    let mut v = 0.0;
    let mut done: Vec<f64> = vec![];
    for i in 0..n {
        if !e[i] || done.contains(&t[i]) {
            continue;
        }
        done.push(t[i]);
        let deaths: Vec<usize> = (0..n).filter(|&k| e[k] && t[k] == t[i]).collect();
        let risk: f64 = (0..n).filter(|&k| t[k] >= t[i]).map(|k| eta[k].exp()).sum();
        let tied: f64 = deaths.iter().map(|&k| eta[k].exp()).sum();
        let m = deaths.len() as f64;
        for (l, &k) in deaths.iter().enumerate() {
            v += (risk - l as f64 / m * tied).ln() - eta[k];
        }
    }
    v
}

/// Newton-Raphson on the tie-free partial likelihood with 2 covariates.
fn newton_oracle_2(x: &[f64], t: &[f64], e: &[bool]) -> [f64; 2] {
    let n = t.len();
    let mut b = [0.0f64; 2];
    for _ in 0..100 {
        let (mut g, mut h) = ([0.0f64; 2], [[0.0f64; 2]; 2]);
        for i in (0..n).filter(|&i| e[i]) {
            let (mut s0, mut s1, mut s2) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
            for j in (0..n).filter(|&j| t[j] >= t[i]) {
                let xj = [x[2 * j], x[2 * j + 1]];
                let w = (xj[0] * b[0] + xj[1] * b[1]).exp();
                s0 += w;
                for a in 0..2 {
                    s1[a] += w * xj[a];
                    for c in 0..2 {
                        s2[a][c] += w * xj[a] * xj[c];
                    }
                }
            }
            for a in 0..2 {
                g[a] += s1[a] / s0 - x[2 * i + a];
                for c in 0..2 {
                    h[a][c] += s2[a][c] / s0 - s1[a] * s1[c] / (s0 * s0);
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        b[0] -= step[0];
        b[1] -= step[1];
        if step[0].abs().max(step[1].abs()) < 1e-14 {
            break;
        }
    }
    b
}

// ---------------------------------------------------------------- criteria

fn kmeans_oracle() -> Outcome {
    let start = Instant::now();
    let centers = random_centers(3, 8, 10.0, 1);
    let (x, planted) = gaussian_blobs(&centers, 100, 1.0, 2);
    ensure!(x.n_rows() == 300 && x.dim() == 8, "blob shape {}x{}", x.n_rows(), x.dim());
    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(3).seed(0)).map_err(|e| e.to_string())?;
    let found = assign(&model, &x).map_err(|e| e.to_string())?;
    let ari = ari_oracle(&found, &planted);
    ensure!(ari >= 0.99, "ARI {ari:.4} < 0.99");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f32>> = (0..10_000)
        .map(|_| (0..8).map(|_| rng.random_range(-15.0f32..15.0)).collect())
        .collect();
    let probe = EmbeddingMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let got = assign(&model, &probe).map_err(|e| e.to_string())?;
    let mismatches = (0..probe.n_rows())
        .filter(|&i| got[i] != nearest_oracle(&model.centroids, model.dim, probe.row(i)))
        .count();
    ensure!(mismatches == 0, "{mismatches} of 10000 assignments differ from brute force");
    within(start.elapsed(), Duration::from_secs(5), "k-means check")?;
    Ok(format!("ARI {ari:.4}, 10000/10000 assignments exact, {:.2?}", start.elapsed()))
}

fn knn_oracle_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = |n: usize| -> Vec<Vec<f32>> {
        (0..n).map(|_| (0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()
    };
    let reference = EmbeddingMatrix::from_rows(&rows(1000)).map_err(|e| e.to_string())?;
    let queries = EmbeddingMatrix::from_rows(&rows(200)).map_err(|e| e.to_string())?;
    let labels: Vec<bool> = (0..1000).map(|i| reference.row(i)[0] + reference.row(i)[1] > 0.0).collect();
    let mut total = Duration::ZERO;
    for metric in [Metric::Cosine, Metric::Euclidean] {
        let index = KnnIndex::new(reference.clone(), labels.clone(), metric).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let got = predict_knn(&index, &queries, 20).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        total += elapsed;
        within(elapsed, Duration::from_secs(2), "predict_knn")?;
        let want = knn_oracle(&index, &queries, 20);
        let diff = got.iter().zip(&want).filter(|(a, b)| a != b).count();
        ensure!(diff == 0, "{metric:?}: {diff} of 200 scores differ from brute force");
    }
    Ok(format!("200 queries x 1000 refs, k=20, cosine and euclidean exact, {total:.2?}"))
}

fn auroc_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(4..200);
        let levels = rng.random_range(2..30);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let got = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = auroc_oracle(&scores, &labels);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-12, "case {case}: {got} vs oracle {want}");
        // strictly increasing maps of small integers are exact in f64
        for transformed in [
            scores.iter().map(|s| s.exp()).collect::<Vec<_>>(),
            scores.iter().map(|s| 3.0 * s * s * s - 7.0).collect(),
        ] {
            let again = auroc(&transformed, &labels).map_err(|e| e.to_string())?;
            ensure!(again == got, "case {case}: {again} after monotone transform, {got} before");
        }
    }
    Ok(format!("100 tied instances, max |error| {worst:.1e}, transform invariance exact"))
}

fn cox_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (n, p) = (20, 4);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(1..8) as f64).collect();
    let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let data = CoxData::new(&x, p, &t, &e).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (v, g) = neg_log_partial_likelihood(&data, &beta, Ties::Efron).map_err(|e| e.to_string())?;
        let direct = efron_nll_oracle(&x, p, &t, &e, &beta);
        ensure!((v - direct).abs() <= 1e-10 * direct.abs(), "value {v} vs enumeration {direct}");
        for j in 0..p {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (efron_nll_oracle(&x, p, &t, &e, &up) - efron_nll_oracle(&x, p, &t, &e, &dn)) / (2.0 * h);
            let rel = (g[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
            ensure!(rel <= 1e-5, "d/dbeta{j}: analytic {} vs central difference {fd}", g[j]);
        }
    }

    let m = 80;
    let x2: Vec<f64> = (0..m * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t2: Vec<f64> = (0..m)
        .map(|i| (rng.random_range(0.0f64..1.0).ln().abs() / (0.8 * x2[2 * i] - 0.5 * x2[2 * i + 1]).exp()) + 1e-3 * i as f64)
        .collect();
    let e2: Vec<bool> = (0..m).map(|_| rng.random_bool(0.75)).collect();
    let mut sorted = t2.clone();
    sorted.sort_by(f64::total_cmp);
    ensure!(sorted.windows(2).all(|w| w[0] < w[1]), "tie in generated times");
    let oracle = newton_oracle_2(&x2, &t2, &e2);
    let data2 = CoxData::new(&x2, 2, &t2, &e2).map_err(|e| e.to_string())?;
    let fit = fit_coxph(&data2, &CoxOptions::penalized(0.0, 0.5)).map_err(|e| e.to_string())?;
    let gap = (0..2).map(|j| (fit.coefficients[j] - oracle[j]).abs()).fold(0.0, f64::max);
    ensure!(gap <= 1e-4, "fit {:?} vs Newton {oracle:?}", fit.coefficients);
    within(start.elapsed(), Duration::from_secs(5), "Cox check")?;
    Ok(format!(
        "max gradient rel error {worst:.1e} over 10 points, Newton gap {gap:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn survival_estimators_check() -> Outcome {
    let km = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]).map_err(|e| e.to_string())?;
    ensure!(
        km.at(1.0) == 2.0 / 3.0 && km.at(2.0) == 2.0 / 3.0 && km.at(3.0) == 0.0 && km.at(0.5) == 1.0,
        "KM values {:?}",
        km.survival
    );
    let all = kaplan_meier(&[1.0, 2.0, 3.0], &[true; 3]).map_err(|e| e.to_string())?;
    ensure!(all.survival == vec![2.0 / 3.0, 1.0 / 3.0, 0.0], "uncensored KM {:?}", all.survival);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..500 {
        let t: Vec<f64> = (0..8).map(|_| rng.random_range(1..6) as f64).collect();
        let e: Vec<bool> = (0..8).map(|_| rng.random_bool(0.6)).collect();
        let s: Vec<f64> = (0..8).map(|_| rng.random_range(0..4) as f64).collect();
        let want = concordance_oracle(&t, &e, &s);
        match concordance(&t, &e, &s) {
            Ok(c) => ensure!(c == want, "case {case}: concordance {c} vs pairs {want}"),
            Err(_) => ensure!(want.is_nan(), "case {case}: error with comparable pairs"),
        }
    }

    let n = 60;
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..25.0)).collect();
    let events = vec![true; n];
    let risk: Vec<f64> = t.iter().map(|&ti| 1.0 / ti + rng.random_range(0.0..0.05)).collect();
    let grid: Vec<f64> = (1..=23).map(f64::from).collect();
    let td = time_dependent_auc(&t, &events, &risk, &grid).map_err(|e| e.to_string())?;
    for &(time, value) in &td.points {
        let cases: Vec<bool> = t.iter().map(|&ti| ti <= time).collect();
        let plain = auroc_oracle(&risk, &cases);
        ensure!((value - plain).abs() <= 1e-12, "t={time}: td-AUC {value} vs AUROC {plain}");
    }
    ensure!(!td.points.is_empty(), "no td-AUC grid point evaluated");

    let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let thresholds: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let horizon = 15.0;
    let nb = net_benefit(&t, &events, &probs, horizon, &thresholds).map_err(|e| e.to_string())?;
    for (k, &pt) in thresholds.iter().enumerate() {
        let (mut tp, mut fp) = (0usize, 0usize);
        for i in (0..n).filter(|&i| probs[i] >= pt) {
            if t[i] <= horizon {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let want = tp as f64 / n as f64 - (fp as f64 / n as f64) * (pt / (1.0 - pt));
        ensure!(nb.model[k] == want, "p={pt}: NB {} vs binary formula {want}", nb.model[k]);
    }
    ensure!(nb.treat_none.iter().all(|&v| v == 0.0), "treat-none curve is not zero");
    Ok(format!(
        "KM exact, 500 concordance instances exact, td-AUC at {} grid times, NB at {} thresholds",
        td.points.len(),
        thresholds.len()
    ))
}

fn purity_check() -> Outcome {
    let centers = random_centers(2, 8, 10.0, 8);
    let (x, planted) = gaussian_blobs(&centers, 1000, 1.0, 9);
    let labels: Vec<Option<String>> = planted.iter().map(|&c| Some(["tumor", "stroma"][c].to_string())).collect();
    let mut coverages = vec![];
    for k in [2, 8, 32] {
        let model = fit_minibatch_kmeans(&x, &KMeansParams::new(k).seed(0)).map_err(|e| e.to_string())?;
        let a = assign(&model, &x).map_err(|e| e.to_string())?;
        let report = cluster_purity(&a, &labels).map_err(|e| e.to_string())?;
        coverages.push((k, report.coverage(DEFAULT_PURITY_THRESHOLD)));
    }
    ensure!(coverages[0].1 == 1.0, "coverage at k=2 is {}", coverages[0].1);
    ensure!(
        coverages.windows(2).all(|w| w[1].1 >= w[0].1),
        "coverage decreases with k: {coverages:?}"
    );
    Ok(format!("coverage at tau=0.9: {coverages:?}"))
}

fn end_to_end_check() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let start = Instant::now();
        let params = CohortParams::default();
        ensure!(
            params.n_patients == 200 && params.tiles_per_patient == 50 && params.dim == 16,
            "unexpected cohort shape"
        );
        let cohort = synthetic_cohort(&params).map_err(|e| e.to_string())?;
        let model = fit_minibatch_kmeans(&cohort.embeddings, &KMeansParams::new(32).seed(0)).map_err(|e| e.to_string())?;
        let a = assign(&model, &cohort.embeddings).map_err(|e| e.to_string())?;
        let fractions = cluster_fractions(&a, &cohort.manifest, 32).map_err(|e| e.to_string())?;
        let horizon = 15.0;
        let mut summary = vec![];
        for covariates in CovariateSet::ALL {
            let wp = WorkflowParams {
                covariates,
                splits: SplitSpec {
                    test_fraction: 0.25,
                    n_splits: 100,
                    seed: 0,
                },
                cox: CoxOptions::penalized(0.001, 0.5),
                ..WorkflowParams::default()
            };
            let report = run_survival_workflow(&cohort.clinical, &fractions, &wp).map_err(|e| e.to_string())?;
            let ev = &report.evaluation;
            let at = |s: &histokit::survival::ModelSummary| s.td_auc.iter().find(|p| p.0 == horizon).map(|p| p.1);
            let (base, aug) = (at(&ev.baseline), at(&ev.augmented));
            let (Some(base), Some(aug)) = (base, aug) else {
                return Err(format!("{covariates}: no td-AUC at {horizon} years"));
            };
            ensure!(
                ev.win_fraction > 0.6,
                "{covariates}: augmented wins {:.2} of splits",
                ev.win_fraction
            );
            ensure!(aug >= base, "{covariates}: td-AUC({horizon}) augmented {aug:.3} < baseline {base:.3}");
            summary.push(format!(
                "{covariates} wins {:.2} td-AUC({horizon}) {base:.3}->{aug:.3}",
                ev.win_fraction
            ));
        }
        within(start.elapsed(), Duration::from_secs(180), "end-to-end run")?;
        Ok(format!("{}; {:.1?} on 1 thread", summary.join(", "), start.elapsed()))
    })
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism_check() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let run = |args: &[&str]| -> Result<(), String> {
        let mut full = vec!["histokit".to_string()];
        full.extend(args.iter().map(|s| s.to_string()));
        match histokit::cli::run(full) {
            0 => Ok(()),
            code => Err(format!("`{}` exited with {code}", args.join(" "))),
        }
    };
    let d = data.to_str().unwrap();
    run(&["synth", "--out", d, "--patients", "80", "--tiles", "20", "--dim", "8", "--seed", "3"])?;
    let cfg = data.join("histokit.toml");
    let cfg = cfg.to_str().unwrap();
    let mut files = 0;
    for cmd in ["cluster", "fractions", "survival"] {
        let mut outputs = vec![];
        for r in 0..2 {
            let out = tmp.path().join(format!("{cmd}{r}"));
            let o = out.to_str().unwrap();
            let a = tmp.path().join(format!("cluster{r}/assignments.csv"));
            let f = tmp.path().join(format!("fractions{r}/fractions.csv"));
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            match cmd {
                "cluster" => {
                    let tree = out.join("tree.json");
                    let t = tree.to_str().unwrap();
                    run(&["--config", cfg, "cluster", "--k", "8", "--seed", "5", "--out", o, "--tree", t])?
                }
                "fractions" => run(&[
                    "--config",
                    cfg,
                    "fractions",
                    "--k",
                    "8",
                    "--assignments",
                    a.to_str().unwrap(),
                    "--out",
                    f.to_str().unwrap(),
                ])?,
                _ => run(&[
                    "--config",
                    cfg,
                    "survival",
                    "--fractions",
                    f.to_str().unwrap(),
                    "--splits",
                    "20",
                    "--importance-fits",
                    "10",
                    "--select",
                    "3",
                    "--seed",
                    "11",
                    "--export-splits",
                    "--out",
                    o,
                ])?,
            }
            outputs.push(read_tree(&out));
        }
        ensure!(!outputs[0].is_empty(), "{cmd} wrote nothing");
        ensure!(outputs[0] == outputs[1], "{cmd} outputs differ between identical runs");
        files += outputs[0].len();
    }
    Ok(format!("cluster, fractions, survival: {files} files byte-identical across two runs"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("k-means oracle", kmeans_oracle),
        ("KNN oracle", knn_oracle_check),
        ("AUROC oracle", auroc_check),
        ("Cox gradient and Newton oracle", cox_check),
        ("survival estimators", survival_estimators_check),
        ("purity workflow", purity_check),
        ("end-to-end synthetic cohort", end_to_end_check),
        ("CLI determinism", determinism_check),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
