//! Dense embedding matrices and the EMB1 exchange format.
//!
//! EMB1 layout (all little-endian):
//!
//! | offset | size | field                  |
//! |--------|------|------------------------|
//! | 0      | 4    | magic `b"EMB1"`        |
//! | 4      | 4    | `u32` version (= 1)    |
//! | 8      | 8    | `u64` row count        |
//! | 16     | 4    | `u32` dimension        |
//! | 20     | 4·n·d| row-major `f32` values |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;
pub const EMB1_HEADER_LEN: usize = 20;

/// Row-major `n_rows × dim` matrix of encoder features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    values: Vec<f32>,
    tile_ids: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major values, rejecting non-finite entries.
    pub fn new(n_rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_rows * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {n_rows}x{dim} matrix, got {}",
                n_rows * dim,
                values.len()
            )));
        }
        if dim == 0 && n_rows > 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        check_finite(&values, dim)?;
        Ok(Self {
            n_rows,
            dim,
            values,
            tile_ids: None,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Format {
                    path: format!("row {i}").into(),
                    message: format!("expected {dim} values, got {}", r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn with_tile_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_rows {
            return Err(Error::RowCountMismatch {
                left: self.n_rows,
                right: ids.len(),
            });
        }
        self.tile_ids = Some(ids);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Tile ids carried by a CSV source, if any.
    pub fn tile_ids(&self) -> Option<&[String]> {
        self.tile_ids.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on 0, and a 0-dim matrix is only legal when empty
        self.values.chunks_exact(self.dim.max(1))
    }

    /// New matrix holding the given rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        let tile_ids = self
            .tile_ids
            .as_ref()
            .map(|ids| rows.iter().map(|&r| ids[r].clone()).collect());
        Self {
            n_rows: rows.len(),
            dim: self.dim,
            values,
            tile_ids,
        }
    }

    /// Copy with every row scaled to unit L2 norm (zero rows are left as-is).
    pub fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(self.dim.max(1)) {
            let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (*v as f64 / norm) as f32;
                }
            }
        }
        out
    }

    /// Column-wise mean in f64.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        let n = self.n_rows.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

fn check_finite(values: &[f32], dim: usize) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / dim.max(1),
            col: pos % dim.max(1),
        });
    }
    Ok(())
}

/// Encodes a matrix as EMB1 bytes.
pub fn encode_emb1(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(EMB1_HEADER_LEN + matrix.values.len() * 4);
    buf.extend_from_slice(EMB1_MAGIC);
    buf.extend_from_slice(&EMB1_VERSION.to_le_bytes());
    buf.extend_from_slice(&(matrix.n_rows as u64).to_le_bytes());
    buf.extend_from_slice(&(matrix.dim as u32).to_le_bytes());
    for v in &matrix.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Decodes EMB1 bytes; `path` is only used for error context.
pub fn decode_emb1(bytes: &[u8], path: &Path) -> Result<EmbeddingMatrix> {
    if bytes.len() < EMB1_HEADER_LEN {
        return Err(Error::format(path, "truncated EMB1 header"));
    }
    if &bytes[0..4] != EMB1_MAGIC {
        return Err(Error::format(path, "bad magic, expected EMB1"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMB1_VERSION {
        return Err(Error::format(path, format!("unsupported EMB1 version {version}")));
    }
    let n_rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
    let expected = n_rows
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format(path, "EMB1 header dimensions overflow"))?;
    let payload = &bytes[EMB1_HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(Error::format(
            path,
            format!(
                "dimension mismatch: header declares {n_rows}x{dim} ({expected} bytes), payload has {} bytes",
                payload.len()
            ),
        ));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(n_rows as usize, dim as usize, values)
}

pub fn write_emb1(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_emb1(matrix))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `tile_id,f0,..` CSV. Uses the matrix's own tile ids, or `row{i}` if absent.
pub fn write_embeddings_csv(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["tile_id".to_string()];
    header.extend((0..matrix.dim).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (i, row) in matrix.rows().enumerate() {
        let id = matrix
            .tile_ids
            .as_ref()
            .map_or_else(|| format!("row{i}"), |ids| ids[i].clone());
        let mut rec = vec![id];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_embeddings_csv(path: &Path) -> Result<EmbeddingMatrix> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let has_ids = headers.get(0).map(str::trim) == Some("tile_id");
    let dim = headers.len() - usize::from(has_ids);
    if dim == 0 {
        return Err(Error::format(path, "no feature columns"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::format(
                path,
                format!("row {row}: expected {} fields, got {}", headers.len(), rec.len()),
            ));
        }
        let mut fields = rec.iter();
        if has_ids {
            ids.push(fields.next().unwrap().to_string());
        }
        for (col, field) in fields.enumerate() {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::format(path, format!("row {row}, column {col}: cannot parse `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            values.push(v);
        }
    }
    let n = values.len() / dim;
    let m = EmbeddingMatrix::new(n, dim, values)?;
    if has_ids {
        m.with_tile_ids(ids)
    } else {
        Ok(m)
    }
}

/// Loads embeddings from `.emb1` (by magic) or CSV.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EMB1_MAGIC) {
        decode_emb1(&bytes, path)
    } else if path.extension().is_some_and(|e| e == "emb1") {
        Err(Error::format(path, "bad magic, expected EMB1"))
    } else {
        drop(bytes);
        read_embeddings_csv(path)
    }
}
