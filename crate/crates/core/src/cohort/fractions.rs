use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datastore::TileManifest;
use crate::error::{Error, Result};

/// Share of a patient's tiles falling in each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFractions {
    pub patient_id: String,
    pub fractions: Vec<f64>,
    pub tile_count: usize,
}

/// One record per manifest patient, sorted by patient id.
pub fn cluster_fractions(assignments: &[usize], manifest: &TileManifest, k: usize) -> Result<Vec<ClusterFractions>> {
    if assignments.len() != manifest.len() {
        return Err(Error::RowCountMismatch {
            left: assignments.len(),
            right: manifest.len(),
        });
    }
    let mut counts: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, (&c, rec)) in assignments.iter().zip(manifest.records()).enumerate() {
        if c >= k {
            return Err(Error::InvalidArgument(format!("row {row}: cluster {c} out of range for k={k}")));
        }
        counts.entry(rec.patient_id.as_str()).or_insert_with(|| vec![0; k])[c] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(pid, c)| {
            let total: usize = c.iter().sum();
            ClusterFractions {
                patient_id: pid.to_string(),
                fractions: c.iter().map(|&v| v as f64 / total as f64).collect(),
                tile_count: total,
            }
        })
        .collect())
}

/// Writes `patient_id,frac_0,…,frac_{k-1},tile_count`.
pub fn write_fractions_csv(path: impl AsRef<Path>, fractions: &[ClusterFractions]) -> Result<()> {
    let path = path.as_ref();
    let k = fractions.first().map_or(0, |f| f.fractions.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["patient_id".to_string()];
    header.extend((0..k).map(|i| format!("frac_{i}")));
    header.push("tile_count".into());
    w.write_record(&header)?;
    for f in fractions {
        let mut rec = vec![f.patient_id.clone()];
        rec.extend(f.fractions.iter().map(|v| v.to_string()));
        rec.push(f.tile_count.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_fractions_csv(path: impl AsRef<Path>) -> Result<Vec<ClusterFractions>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("patient_id") || headers.iter().next_back() != Some("tile_count") {
        return Err(Error::format(path, "expected header patient_id,frac_0,…,tile_count"));
    }
    let k = headers.len() - 2;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("row {row}: cannot parse `{s}`")))
        };
        let fractions = (1..=k).map(|c| parse(&rec[c])).collect::<Result<Vec<_>>>()?;
        let tile_count = rec[k + 1]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("row {row}: bad tile_count")))?;
        out.push(ClusterFractions {
            patient_id: rec[0].to_string(),
            fractions,
            tile_count,
        });
    }
    Ok(out)
}
