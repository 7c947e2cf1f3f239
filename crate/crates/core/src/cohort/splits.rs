use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub n_splits: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            n_splits: 1000,
            seed: 0,
        }
    }
}

/// One train/test partition; indices are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Event-stratified random train/test partitions.
///
/// Each split draws `round(f*n)` test subjects, of which
/// `round(n_test * E / n)` are events (clamped so both arms keep at least one
/// event and one non-event). Split `i` uses its own RNG stream, so any split
/// can be regenerated independently of the others.
pub fn stratified_splits(events: &[bool], spec: &SplitSpec) -> Result<Vec<Split>> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let n = events.len();
    let pos: Vec<usize> = (0..n).filter(|&i| events[i]).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| !events[i]).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "stratified splitting needs at least 2 events and 2 non-events, got {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let n_test = ((spec.test_fraction * n as f64).round() as usize).clamp(2, n - 2);
    let test_pos = ((n_test as f64 * pos.len() as f64 / n as f64).round() as usize)
        .clamp(1, pos.len() - 1)
        .min(n_test - 1);
    let test_neg = (n_test - test_pos).clamp(1, neg.len() - 1);

    Ok((0..spec.n_splits)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(index as u64);
            let (mut p, mut q) = (pos.clone(), neg.clone());
            p.shuffle(&mut rng);
            q.shuffle(&mut rng);
            let mut test: Vec<usize> = p[..test_pos].iter().chain(&q[..test_neg]).copied().collect();
            let mut train: Vec<usize> = p[test_pos..].iter().chain(&q[test_neg..]).copied().collect();
            test.sort_unstable();
            train.sort_unstable();
            Split { index, train, test }
        })
        .collect())
}

/// Writes `split,patient_id,set` rows.
pub fn write_splits_csv(path: impl AsRef<Path>, splits: &[Split], patient_ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["split", "patient_id", "set"])?;
    for s in splits {
        for (set, rows) in [("train", &s.train), ("test", &s.test)] {
            for &r in rows.iter() {
                let pid = patient_ids
                    .get(r)
                    .ok_or_else(|| Error::InvalidArgument(format!("split row {r} has no patient id")))?;
                w.write_record([s.index.to_string().as_str(), pid, set])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
