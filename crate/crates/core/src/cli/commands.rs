use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::*;
use crate::clusterer::{
    assign, cluster_purity, fit_minibatch_kmeans, purity_coverage_sweep, write_annotations_csv, AnnotationTree,
    KMeansParams,
};
use crate::cohort::{
    build_design_matrix, cluster_fractions, load_fractions_csv, stratified_splits, write_fractions_csv,
    write_splits_csv, SplitSpec,
};
use crate::datastore::{
    align, load_clinical, load_embeddings, load_manifest, write_clinical, write_emb1, write_manifest, TileManifest,
};
use crate::error::Error;
use crate::knn::{repeated_eval, subsample_builder};
use crate::survival::{write_coefficient_csv, write_net_benefit_csv, write_td_auc_csv, CoxOptions, EvalGrid};
use crate::synthetic::{synthetic_cohort, CohortParams};
use crate::workflow::{run_survival_workflow, WorkflowParams};

type CmdResult = Result<(), CliError>;

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(config)
        .ok_or_else(|| CliError::Usage(format!("missing --{name} (or set it in the config file)")))
}

fn output_dir(flag: Option<PathBuf>, config: &ProjectConfig) -> Result<PathBuf, CliError> {
    let dir = required(flag, config.paths.output_dir.clone(), "out")?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?);
    Ok(())
}

fn write_assignments(path: &Path, manifest: &TileManifest, assignments: &[usize]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record(["tile_id", "cluster"]).map_err(Error::from)?;
    for (rec, c) in manifest.records().iter().zip(assignments) {
        w.write_record([rec.tile_id.as_str(), &c.to_string()]).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads `tile_id,cluster` and checks it follows the manifest's tile order.
pub fn load_assignments(path: &Path, manifest: &TileManifest) -> crate::Result<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["tile_id", "cluster"] {
        return Err(Error::format(path, "expected header tile_id,cluster"));
    }
    let mut out = Vec::with_capacity(manifest.len());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let expected = manifest.get(row).map(|r| r.tile_id.as_str()).unwrap_or("");
        if &rec[0] != expected {
            return Err(Error::TileOrderMismatch {
                row,
                embedding: rec[0].to_string(),
                manifest: expected.to_string(),
            });
        }
        let c = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("row {row}: bad cluster `{}`", &rec[1])))?;
        out.push(c);
    }
    if out.len() != manifest.len() {
        return Err(Error::RowCountMismatch {
            left: out.len(),
            right: manifest.len(),
        });
    }
    Ok(out)
}

pub fn cluster(config: &ProjectConfig, a: ClusterArgs) -> CmdResult {
    let emb_path = required(a.embeddings, config.paths.embeddings.clone(), "embeddings")?;
    let man_path = required(a.manifest, config.paths.manifest.clone(), "manifest")?;
    let out = output_dir(a.out, config)?;
    let c = &config.clustering;
    let params = KMeansParams {
        k: a.k.unwrap_or(c.k),
        batch_size: a.batch_size.unwrap_or(c.batch_size),
        max_iters: a.max_iters.unwrap_or(c.max_iters),
        seed: a.seed.unwrap_or(c.seed),
        ..KMeansParams::default()
    };
    let normalize = a.normalize || c.normalize;
    let data = align(load_embeddings(&emb_path)?, load_manifest(&man_path)?)?;
    let x = if normalize { data.embeddings().l2_normalized() } else { data.embeddings().clone() };
    let model = fit_minibatch_kmeans(&x, &params)?;
    let assignments = assign(&model, &x)?;

    let model_path = out.join("model.json");
    let assign_path = out.join("assignments.csv");
    let tree_path = a.tree.or(config.paths.tree.clone()).unwrap_or_else(|| out.join("tree.json"));
    if tree_path.exists() && !AnnotationTree::load(&tree_path)?.audit.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "`{}` holds annotations; pass --tree to write the new tree elsewhere",
            tree_path.display()
        ))
        .into());
    }
    if let Some(parent) = tree_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_json(&model_path, &model)?;
    write_assignments(&assign_path, data.manifest(), &assignments)?;
    let mut tree = AnnotationTree::from_clustering(model.clone(), &assignments);
    tree.split_params.batch_size = params.batch_size;
    tree.split_params.max_iters = params.max_iters;
    tree.split_params.normalize = normalize;
    tree.save(&tree_path)?;

    let used = assignments.iter().collect::<std::collections::BTreeSet<_>>().len();
    print_json(&serde_json::json!({
        "k": params.k,
        "seed": params.seed,
        "batch_size": params.batch_size,
        "normalize": normalize,
        "rows": data.len(),
        "non_empty_clusters": used,
        "inertia": model.inertia,
        "iterations": model.iterations_run,
        "model": model_path,
        "assignments": assign_path,
        "tree": tree_path,
    }))
}

pub fn purity(config: &ProjectConfig, a: PurityArgs) -> CmdResult {
    let man_path = required(a.manifest, config.paths.manifest.clone(), "manifest")?;
    let out = output_dir(a.out, config)?;
    let manifest = load_manifest(&man_path)?;
    let labels = manifest.labels();
    if labels.iter().all(Option::is_none) {
        return Err(Error::InvalidArgument(format!("{} has no labeled tiles", man_path.display())).into());
    }
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(CliError::Usage(format!("--tau {} is not in [0, 1]", a.tau)));
    }
    let seed = a.seed.unwrap_or(config.clustering.seed);
    let clusterings: Vec<(usize, Vec<usize>)> = match (a.assignments, a.k) {
        (Some(p), None) => {
            let asg = load_assignments(&p, &manifest)?;
            let k = asg.iter().max().map_or(0, |m| m + 1);
            vec![(k, asg)]
        }
        (None, ks) => {
            let ks = ks.unwrap_or_else(|| vec![config.clustering.k]);
            let emb_path = required(a.embeddings, config.paths.embeddings.clone(), "embeddings")?;
            let data = align(load_embeddings(&emb_path)?, manifest.clone())?;
            let x = if a.normalize || config.clustering.normalize {
                data.embeddings().l2_normalized()
            } else {
                data.embeddings().clone()
            };
            ks.into_iter()
                .map(|k| {
                    let params = KMeansParams::new(k).seed(seed);
                    let m = fit_minibatch_kmeans(&x, &params)?;
                    Ok((k, assign(&m, &x)?))
                })
                .collect::<crate::Result<_>>()?
        }
        (Some(_), Some(_)) => unreachable!("clap rejects --assignments with --k"),
    };

    for (k, asg) in &clusterings {
        let report = cluster_purity(asg, &labels)?;
        let path = out.join(format!("purity_k{k}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(["cluster", "size", "labeled", "majority_label", "purity"])
            .map_err(Error::from)?;
        for c in report.clusters.iter().filter(|c| c.size > 0) {
            w.write_record([
                c.cluster.to_string(),
                c.size.to_string(),
                c.labeled.to_string(),
                c.majority_label.clone().unwrap_or_default(),
                c.purity.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(Error::from)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let rows = purity_coverage_sweep(&clusterings, &labels, a.tau)?;
    let cov_path = out.join("coverage.csv");
    let mut w = csv::Writer::from_path(&cov_path).map_err(Error::from)?;
    w.write_record(["k", "tau", "coverage", "pure_clusters"]).map_err(Error::from)?;
    for r in &rows {
        w.write_record([r.k.to_string(), r.tau.to_string(), r.coverage.to_string(), r.pure_clusters.to_string()])
            .map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(&cov_path, e))?;
    print_json(&serde_json::json!({ "seed": seed, "tau": a.tau, "coverage": rows }))
}

pub fn annotate_export(config: &ProjectConfig, a: AnnotateExportArgs) -> CmdResult {
    let tree_path = required(a.tree, config.paths.tree.clone(), "tree")?;
    let man_path = required(a.manifest, config.paths.manifest.clone(), "manifest")?;
    let out = match a.out {
        Some(p) => p,
        None => output_dir(None, config)?.join("annotations.csv"),
    };
    let manifest = load_manifest(&man_path)?;
    let mut tree = AnnotationTree::load(&tree_path)?;
    let labels = manifest.labels();
    if labels.iter().any(Option::is_some) {
        tree.compute_purity(&labels)?;
    }
    let rows = tree.export_annotations();
    write_annotations_csv(&out, &rows, &manifest)?;
    let labeled = rows.iter().filter(|r| r.label.is_some()).count();
    print_json(&serde_json::json!({
        "tree_version": tree.version,
        "tiles": rows.len(),
        "labeled_tiles": labeled,
        "output": out,
    }))
}

pub fn fractions(config: &ProjectConfig, a: FractionsArgs) -> CmdResult {
    let out = match a.out {
        Some(p) => p,
        None => output_dir(None, config)?.join("fractions.csv"),
    };
    let asg_path = match a.assignments {
        Some(p) => p,
        None => required(config.paths.output_dir.clone(), None, "assignments")?.join("assignments.csv"),
    };
    let man_path = required(a.manifest, config.paths.manifest.clone(), "manifest")?;
    let manifest = load_manifest(&man_path)?;
    let assignments = load_assignments(&asg_path, &manifest)?;
    let k = a.k.unwrap_or(config.clustering.k);
    let f = cluster_fractions(&assignments, &manifest, k)?;
    write_fractions_csv(&out, &f)?;
    print_json(&serde_json::json!({ "k": k, "patients": f.len(), "output": out }))
}

fn binary_labels(manifest: &TileManifest, positive: &str) -> (Vec<usize>, Vec<bool>) {
    manifest
        .records()
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.label.as_ref().map(|l| (i, l == positive)))
        .unzip()
}

pub fn knn_eval(a: KnnEvalArgs) -> CmdResult {
    if !(a.subsample > 0.0 && a.subsample <= 1.0) {
        return Err(CliError::Usage(format!("--subsample {} is not in (0, 1]", a.subsample)));
    }
    let reference = align(load_embeddings(&a.reference)?, load_manifest(&a.reference_manifest)?)?;
    let query = align(load_embeddings(&a.query)?, load_manifest(&a.query_manifest)?)?;
    let (ref_rows, ref_labels) = binary_labels(reference.manifest(), &a.positive);
    let (q_rows, q_labels) = binary_labels(query.manifest(), &a.positive);
    let ref_emb = reference.embeddings().select_rows(&ref_rows);
    let q_emb = query.embeddings().select_rows(&q_rows);
    let summary = repeated_eval(
        subsample_builder(&ref_emb, &ref_labels, a.subsample, a.metric),
        &q_emb,
        &q_labels,
        a.k,
        a.runs,
        a.seed,
    )?;
    if let Some(p) = &a.out {
        write_json(p, &summary)?;
    }
    print_json(&summary)
}

pub fn survival(config: &ProjectConfig, a: SurvivalArgs) -> CmdResult {
    let s = &config.survival;
    let clinical_path = required(a.clinical, config.paths.clinical.clone(), "clinical")?;
    let fractions_path = match a.fractions {
        Some(p) => p,
        None => required(config.paths.output_dir.clone(), None, "fractions")?.join("fractions.csv"),
    };
    let out = output_dir(a.out, config)?;
    let clinical = load_clinical(&clinical_path)?;
    let fractions = load_fractions_csv(&fractions_path)?;
    let covariates = a.covariates.unwrap_or_else(|| s.covariates.clone());
    if covariates.is_empty() {
        return Err(CliError::Usage("no covariate sets selected".into()));
    }
    let splits = SplitSpec {
        test_fraction: a.test_fraction.unwrap_or(s.test_fraction),
        n_splits: a.splits.unwrap_or(s.n_splits),
        seed: a.seed.unwrap_or(s.seed),
    };
    let cox = CoxOptions::penalized(a.penalizer.unwrap_or(s.penalizer), a.l1_ratio.unwrap_or(s.l1_ratio));
    let grid = EvalGrid {
        horizon: a.horizon.unwrap_or(s.horizon),
        ..EvalGrid::default()
    };

    let mut summary = Vec::new();
    for cov in covariates {
        let params = WorkflowParams {
            covariates: cov,
            include_fractions: !a.no_fractions,
            clusters: a.clusters.clone(),
            n_selected: a.select,
            importance_fits: a.importance_fits,
            splits,
            cox: cox.clone(),
            grid: grid.clone(),
        };
        let report = run_survival_workflow(&clinical, &fractions, &params)?;
        let dir = out.join(cov.key());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(&dir.join("report.json"), &report)?;
        let e = &report.evaluation;
        for (name, m) in [("baseline", &e.baseline), ("augmented", &e.augmented)] {
            write_td_auc_csv(dir.join(format!("td_auc_{name}.csv")), &m.td_auc)?;
            write_net_benefit_csv(
                dir.join(format!("net_benefit_{name}.csv")),
                &e.thresholds,
                &m.net_benefit,
                &e.nb_treat_all,
                &e.nb_treat_none,
            )?;
        }
        write_coefficient_csv(dir.join("coefficients_baseline.csv"), &report.baseline_table)?;
        write_coefficient_csv(dir.join("coefficients_augmented.csv"), &report.augmented_table)?;
        if a.export_splits {
            let design = build_design_matrix(&clinical, &fractions, &[], Some(cov), false)?;
            write_splits_csv(dir.join("splits.csv"), &stratified_splits(&design.events, &splits)?, &design.patient_ids)?;
        }
        summary.push(serde_json::json!({
            "covariates": cov,
            "seed": e.seed,
            "splits": e.n_splits,
            "evaluated_splits": e.evaluated_splits,
            "failed_splits": e.failed_splits,
            "win_fraction": e.win_fraction,
            "selected_clusters": report.selection.as_ref().map(|s| s.indices.clone()).or(params.clusters.clone()),
            "excluded_patients": report.excluded.len(),
            "concordance_baseline": e.baseline.concordance_mean,
            "concordance_augmented": e.augmented.concordance_mean,
            "td_auc_baseline": e.baseline.td_auc_mean,
            "td_auc_augmented": e.augmented.td_auc_mean,
            "output": dir,
        }));
    }
    print_json(&summary)
}

pub fn serve(config: &ProjectConfig, a: ServeArgs) -> CmdResult {
    let tree_path = required(a.tree, config.paths.tree.clone(), "tree")?;
    let emb_path = required(a.embeddings, config.paths.embeddings.clone(), "embeddings")?;
    let man_path = required(a.manifest, config.paths.manifest.clone(), "manifest")?;
    let bind = a.bind.unwrap_or_else(|| config.serve.bind.clone());
    let tile_root = a.tile_root.or(config.serve.tile_root.clone());
    let sample_size = a.sample_size.unwrap_or(config.serve.sample_size);
    let (emb, manifest) = align(load_embeddings(&emb_path)?, load_manifest(&man_path)?)?.into_parts();
    let state = Arc::new(crate::serve::AppState::load(tree_path, emb, manifest, tile_root, sample_size)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(PathBuf::from("tokio runtime"), e))?;
    eprintln!("serving on http://{bind}");
    rt.block_on(crate::serve::serve(state, &bind))?;
    Ok(())
}

pub fn synth(a: SynthArgs) -> CmdResult {
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let params = CohortParams {
        n_patients: a.patients,
        tiles_per_patient: a.tiles,
        dim: a.dim,
        seed: a.seed,
        ..CohortParams::default()
    };
    let cohort = synthetic_cohort(&params)?;
    write_emb1(a.out.join("embeddings.emb"), &cohort.embeddings)?;
    write_manifest(a.out.join("manifest.csv"), &cohort.manifest)?;
    write_clinical(a.out.join("clinical.csv"), &cohort.clinical)?;
    let mut cfg = ProjectConfig::default();
    cfg.paths.embeddings = Some("embeddings.emb".into());
    cfg.paths.manifest = Some("manifest.csv".into());
    cfg.paths.clinical = Some("clinical.csv".into());
    cfg.paths.tree = Some("out/tree.json".into());
    cfg.paths.output_dir = Some("out".into());
    let cfg_path = a.out.join("histokit.toml");
    fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    print_json(&serde_json::json!({
        "seed": a.seed,
        "patients": a.patients,
        "tiles": cohort.manifest.len(),
        "planted_type": params.planted_type,
        "config": cfg_path,
    }))
}
