use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Metadata for one tile, row-aligned with an embedding matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub tile_id: String,
    pub slide_id: String,
    pub patient_id: String,
    pub label: Option<String>,
    pub image_path: Option<PathBuf>,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

impl TileRecord {
    pub fn new(tile_id: impl Into<String>, slide_id: impl Into<String>, patient_id: impl Into<String>) -> Self {
        Self {
            tile_id: tile_id.into(),
            slide_id: slide_id.into(),
            patient_id: patient_id.into(),
            label: None,
            image_path: None,
            x: None,
            y: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TileManifest {
    records: Vec<TileRecord>,
}

impl TileManifest {
    pub fn new(records: Vec<TileRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.patient_id.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "tile `{}` has an empty patient_id",
                    r.tile_id
                )));
            }
            if !seen.insert(r.tile_id.as_str()) {
                return Err(Error::DuplicateId(r.tile_id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TileRecord] {
        &self.records
    }

    pub fn get(&self, i: usize) -> Option<&TileRecord> {
        self.records.get(i)
    }

    pub fn patient_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    /// Ground-truth labels in row order.
    pub fn labels(&self) -> Vec<Option<String>> {
        self.records.iter().map(|r| r.label.clone()).collect()
    }

    pub fn position(&self, tile_id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.tile_id == tile_id)
    }
}

fn opt(s: Option<&str>) -> Option<String> {
    s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<TileManifest> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (tile, slide, patient) = (required("tile_id")?, required("slide_id")?, required("patient_id")?);
    let (label, image, x, y) = (col("label"), col("image_path"), col("x"), col("y"));

    let parse_coord = |rec: &csv::StringRecord, c: Option<usize>, row: usize| -> Result<Option<f64>> {
        match opt(c.and_then(|c| rec.get(c))) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::format(path, format!("row {row}: bad coordinate `{s}`"))),
        }
    };

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        records.push(TileRecord {
            tile_id: rec.get(tile).unwrap_or_default().trim().to_string(),
            slide_id: rec.get(slide).unwrap_or_default().trim().to_string(),
            patient_id: rec.get(patient).unwrap_or_default().trim().to_string(),
            label: opt(label.and_then(|c| rec.get(c))),
            image_path: opt(image.and_then(|c| rec.get(c))).map(PathBuf::from),
            x: parse_coord(&rec, x, row)?,
            y: parse_coord(&rec, y, row)?,
        });
    }
    TileManifest::new(records)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &TileManifest) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tile_id", "slide_id", "patient_id", "label", "image_path", "x", "y"])?;
    for r in manifest.records() {
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.tile_id.clone(),
            r.slide_id.clone(),
            r.patient_id.clone(),
            r.label.clone().unwrap_or_default(),
            r.image_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            f(r.x),
            f(r.y),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Embeddings and manifest with row `i` of one describing row `i` of the other.
#[derive(Debug, Clone)]
pub struct AlignedDataset {
    embeddings: EmbeddingMatrix,
    manifest: TileManifest,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn manifest(&self) -> &TileManifest {
        &self.manifest
    }

    pub fn get(&self, i: usize) -> (&[f32], &TileRecord) {
        (self.embeddings.row(i), &self.manifest.records()[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], &TileRecord)> {
        self.embeddings.rows().zip(self.manifest.records())
    }

    pub fn into_parts(self) -> (EmbeddingMatrix, TileManifest) {
        (self.embeddings, self.manifest)
    }
}

pub fn align(embeddings: EmbeddingMatrix, manifest: TileManifest) -> Result<AlignedDataset> {
    if embeddings.n_rows() != manifest.len() {
        return Err(Error::RowCountMismatch {
            left: embeddings.n_rows(),
            right: manifest.len(),
        });
    }
    if let Some(ids) = embeddings.tile_ids() {
        if let Some((row, (e, m))) = ids
            .iter()
            .zip(manifest.records())
            .enumerate()
            .find(|(_, (e, m))| **e != m.tile_id)
        {
            return Err(Error::TileOrderMismatch {
                row,
                embedding: e.clone(),
                manifest: m.tile_id.clone(),
            });
        }
    }
    Ok(AlignedDataset {
        embeddings,
        manifest,
    })
}
