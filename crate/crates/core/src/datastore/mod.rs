//! Ingestion, validation and persistence of embeddings, tile manifests and
//! clinical tables.
//!
//! Loaded values are immutable after construction, so they can be shared
//! across threads freely.

mod clinical;
mod embedding;
mod manifest;

pub use clinical::{join_report, load_clinical, write_clinical, ClinicalRecord, ClinicalTable, JoinReport};
pub use embedding::{
    decode_emb1, encode_emb1, load_embeddings, write_emb1, write_embeddings_csv, EmbeddingMatrix, EMB1_HEADER_LEN,
    EMB1_MAGIC, EMB1_VERSION,
};
pub use manifest::{align, load_manifest, write_manifest, AlignedDataset, TileManifest, TileRecord};
