//! The iterative annotation loop on an in-memory tree: inspect samples,
//! label pure clusters, split mixed ones, export per-tile labels.
//!
//! ```bash
//! cargo run --release --example annotation_tree
//! ```

use histokit::clusterer::{assign, fit_minibatch_kmeans, AnnotationTree, KMeansParams};
use histokit::synthetic::{gaussian_blobs, random_centers};

fn main() -> histokit::Result<()> {
    let centers = random_centers(8, 8, 2.5, 3);
    let (x, planted) = gaussian_blobs(&centers, 120, 1.0, 4);
    let truth: Vec<Option<String>> = planted.iter().map(|&c| Some(if c < 4 { "cancer" } else { "benign" }.into())).collect();

    let model = fit_minibatch_kmeans(&x, &KMeansParams::new(4).seed(0))?;
    let a = assign(&model, &x)?;
    let mut tree = AnnotationTree::from_clustering(model, &a);

    // two rounds: label what is pure, split the rest
    for round in 0..2 {
        tree.compute_purity(&truth)?;
        let (_, open) = tree.frontier();
        for id in open {
            let node = tree.node(id)?;
            let sample = tree.sample_tiles(id, 8, round)?;
            let purity = node.purity.unwrap_or(0.0);
            println!(
                "round {round} node {id:>2}: {:>3} tiles, purity {purity:.2}, sample {:?}",
                node.size(),
                &sample[..4.min(sample.len())]
            );
            if purity >= 0.9 {
                let label = node.majority_label.clone().unwrap();
                tree.label_node(id, &label, "example")?;
            } else if node.size() >= 4 {
                let kids = tree.split_node(&x, id, 3, round, "example")?;
                println!("    split into {kids:?}");
            }
        }
    }

    let rows = tree.export_annotations();
    let labeled = rows.iter().filter(|r| r.label.is_some()).count();
    let correct = rows.iter().filter(|r| r.label.is_some() && r.label == truth[r.row]).count();
    println!(
        "tree v{}: {labeled}/{} tiles labeled, {correct} correct, {} audit entries",
        tree.version,
        rows.len(),
        tree.audit.len()
    );

    let path = std::env::temp_dir().join("histokit-example-tree.json");
    tree.save(&path)?;
    assert_eq!(AnnotationTree::load(&path)?, tree);
    println!("saved to {}", path.display());
    Ok(())
}
