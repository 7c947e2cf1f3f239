//! Seeded synthetic data: Gaussian blobs and a toy patient cohort whose
//! survival depends on one tile type.
//!
//! Everything here is deterministic given the seed, which makes the
//! generators usable as fixtures in tests, examples and demos.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::datastore::{ClinicalRecord, ClinicalTable, EmbeddingMatrix, TileManifest, TileRecord};
use crate::error::Result;

/// `k` random centers in `dim` dimensions with coordinates drawn from
/// `N(0, spread^2)`.
pub fn random_centers(k: usize, dim: usize, spread: f64, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).expect("spread must be finite and non-negative");
    (0..k)
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng) as f32).collect())
        .collect()
}

/// `n_per` isotropic Gaussian points around each center, grouped by center.
/// Returns the points and the generating center of every row.
pub fn gaussian_blobs(centers: &[Vec<f32>], n_per: usize, sd: f64, seed: u64) -> (EmbeddingMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd must be finite and non-negative");
    let dim = centers.first().map_or(0, Vec::len);
    let mut values = Vec::with_capacity(centers.len() * n_per * dim);
    let mut truth = Vec::with_capacity(centers.len() * n_per);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per {
            values.extend(center.iter().map(|&m| m + normal.sample(&mut rng) as f32));
            truth.push(c);
        }
    }
    let m = EmbeddingMatrix::new(truth.len(), dim, values).expect("blob values are finite");
    (m, truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortParams {
    pub n_patients: usize,
    pub tiles_per_patient: usize,
    pub dim: usize,
    /// Number of tile-type prototypes.
    pub n_types: usize,
    /// Tile type whose per-patient share drives the hazard.
    pub planted_type: usize,
    /// Log hazard ratio per unit share of the planted type.
    pub planted_effect: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            n_patients: 200,
            tiles_per_patient: 50,
            dim: 16,
            n_types: 8,
            planted_type: 3,
            planted_effect: 5.0,
            noise_sd: 0.6,
            seed: 42,
        }
    }
}

/// A generated cohort: tile embeddings with their manifest, plus a clinical
/// table carrying durations, events and the three clinical baselines.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub embeddings: EmbeddingMatrix,
    pub manifest: TileManifest,
    pub clinical: ClinicalTable,
    /// Generating tile type of every row.
    pub tile_types: Vec<usize>,
    /// Realized share of the planted type per patient, in patient order.
    pub planted_share: Vec<f64>,
    pub params: CohortParams,
}

/// Tile label derived from its type: the lower half of the types are tumour.
pub fn type_label(t: usize, n_types: usize) -> &'static str {
    if t < n_types / 2 {
        "tumor"
    } else {
        "benign"
    }
}

/// Generates the cohort.
///
/// Each patient has a latent clinical risk `z ~ N(0, 1)` that sets the Gleason
/// grade group and the CAPRA-S and MSKCC-S scores, and a planted-type share
/// drawn uniformly from `[0, 0.6]`. Event times are exponential with hazard
/// `0.03 * exp(0.6 z + planted_effect * share)` and are censored uniformly
/// on `[3, 25]` years.
pub fn synthetic_cohort(params: &CohortParams) -> Result<SyntheticCohort> {
    let p = params;
    assert!(p.planted_type < p.n_types, "planted type out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let prototypes = random_centers(p.n_types, p.dim, 3.0, rng.random());
    let noise = Normal::new(0.0, p.noise_sd).expect("noise sd must be finite");
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut values = Vec::with_capacity(p.n_patients * p.tiles_per_patient * p.dim);
    let mut records = Vec::with_capacity(p.n_patients * p.tiles_per_patient);
    let mut tile_types = Vec::with_capacity(p.n_patients * p.tiles_per_patient);
    let mut clinical = Vec::with_capacity(p.n_patients);
    let mut planted_share = Vec::with_capacity(p.n_patients);

    for patient in 0..p.n_patients {
        let pid = format!("P{patient:04}");
        let share: f64 = rng.random_range(0.0..0.6);
        let raw: Vec<f64> = (0..p.n_types).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let rest: f64 = raw.iter().enumerate().filter(|(t, _)| *t != p.planted_type).map(|x| x.1).sum();
        let weights: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(t, w)| if t == p.planted_type { share } else { (1.0 - share) * w / rest })
            .collect();
        let pick = WeightedIndex::new(&weights).expect("mixture weights are positive");

        let mut planted = 0usize;
        for tile in 0..p.tiles_per_patient {
            let t = pick.sample(&mut rng);
            planted += usize::from(t == p.planted_type);
            values.extend(prototypes[t].iter().map(|&m| m + noise.sample(&mut rng) as f32));
            let mut rec = TileRecord::new(format!("{pid}_T{tile:03}"), format!("{pid}_S0"), &pid)
                .with_label(type_label(t, p.n_types));
            rec.x = Some((tile % 10) as f64 * 224.0);
            rec.y = Some((tile / 10) as f64 * 224.0);
            records.push(rec);
            tile_types.push(t);
        }
        let realized = planted as f64 / p.tiles_per_patient as f64;
        planted_share.push(realized);

        let z: f64 = std_normal.sample(&mut rng);
        let grade = (3.0 + 1.2 * z).round().clamp(1.0, 5.0);
        let capra = (4.0 + 2.0 * z + 0.7 * std_normal.sample(&mut rng)).round().clamp(0.0, 12.0);
        let mskcc = (0.75 - 0.12 * z + 0.04 * std_normal.sample(&mut rng)).clamp(0.01, 0.99);
        let hazard = 0.03 * (0.6 * z + p.planted_effect * realized).exp();
        let event_time = rng.sample::<f64, _>(Exp1) / hazard;
        let censor_time = rng.random_range(3.0..25.0);
        clinical.push(ClinicalRecord {
            patient_id: pid,
            duration: event_time.min(censor_time).max(0.05),
            event: event_time <= censor_time,
            covariates: vec![Some(grade), Some(capra), Some((mskcc * 1000.0).round() / 1000.0)],
        });
    }

    let n = records.len();
    Ok(SyntheticCohort {
        embeddings: EmbeddingMatrix::new(n, p.dim, values)?
            .with_tile_ids(records.iter().map(|r| r.tile_id.clone()).collect())?,
        manifest: TileManifest::new(records)?,
        clinical: ClinicalTable::new(
            vec!["gleason_grade".into(), "capra_s".into(), "mskcc_s".into()],
            clinical,
        )?,
        tile_types,
        planted_share,
        params: params.clone(),
    })
}
