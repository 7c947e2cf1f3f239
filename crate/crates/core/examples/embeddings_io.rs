//! Writes tile embeddings as EMB1 and CSV, reads them back and aligns them
//! with a manifest.
//!
//! ```bash
//! cargo run --example embeddings_io
//! ```

use histokit::datastore::{
    align, load_embeddings, load_manifest, write_emb1, write_embeddings_csv, write_manifest, EmbeddingMatrix,
    TileManifest, TileRecord,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("histokit-embeddings-io");
    std::fs::create_dir_all(&dir)?;

    let x = EmbeddingMatrix::from_rows(&[[0.0f32, 0.0], [1.0, 0.0], [0.0, 1.0]])?;
    write_emb1(dir.join("tiles.emb"), &x)?;
    let back = load_embeddings(dir.join("tiles.emb"))?;
    assert_eq!(back.values(), x.values());
    println!("EMB1: {} rows x {} dims, bit-exact", back.n_rows(), back.dim());

    let ids: Vec<String> = (1..=3).map(|i| format!("t{i}")).collect();
    write_embeddings_csv(dir.join("tiles.csv"), &x.clone().with_tile_ids(ids.clone())?)?;
    let from_csv = load_embeddings(dir.join("tiles.csv"))?;
    println!("CSV: tile ids {:?}", from_csv.tile_ids().unwrap());

    let manifest = TileManifest::new(
        ids.iter()
            .enumerate()
            .map(|(i, id)| TileRecord::new(id.as_str(), "slide-1", if i < 2 { "P1" } else { "P2" }))
            .collect(),
    )?;
    write_manifest(dir.join("manifest.csv"), &manifest)?;
    let data = align(from_csv, load_manifest(dir.join("manifest.csv"))?)?;
    for (row, rec) in data.iter() {
        println!("{} ({}) -> {:?}", rec.tile_id, rec.patient_id, row);
    }

    // a manifest in a different order is rejected
    let mut shuffled = manifest.records().to_vec();
    shuffled.swap(0, 1);
    let err = align(load_embeddings(dir.join("tiles.csv"))?, TileManifest::new(shuffled)?).unwrap_err();
    println!("misaligned: {err}");
    Ok(())
}
