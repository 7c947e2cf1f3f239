use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::fractions::ClusterFractions;
use crate::datastore::ClinicalTable;
use crate::error::{Error, Result};
use crate::survival::CoxData;

/// Clinical baseline a survival model is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSet {
    /// Gleason grade group, one-hot GG2..GG5 with GG1 as reference.
    Gleason,
    CapraS,
    MskccS,
}

impl CovariateSet {
    pub const ALL: [CovariateSet; 3] = [CovariateSet::Gleason, CovariateSet::CapraS, CovariateSet::MskccS];

    pub fn key(self) -> &'static str {
        match self {
            CovariateSet::Gleason => "gleason",
            CovariateSet::CapraS => "capra_s",
            CovariateSet::MskccS => "mskcc_s",
        }
    }

    /// Reference levels omitted from the design (reported as `(ref.)` rows).
    pub fn reference_levels(self) -> Vec<String> {
        match self {
            CovariateSet::Gleason => vec!["GG1".into()],
            _ => vec![],
        }
    }
}

impl std::str::FromStr for CovariateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gleason" => Ok(CovariateSet::Gleason),
            "capra_s" => Ok(CovariateSet::CapraS),
            "mskcc_s" => Ok(CovariateSet::MskccS),
            other => Err(Error::InvalidArgument(format!(
                "unknown covariate set `{other}` (expected gleason, capra_s or mskcc_s)"
            ))),
        }
    }
}

impl std::fmt::Display for CovariateSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Display name of a cluster-fraction column.
pub fn cluster_column(c: usize) -> String {
    format!("Cluster {c}")
}

/// Patient-level survival design, rows sorted by patient id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub patient_ids: Vec<String>,
    pub columns: Vec<String>,
    /// Row-major `n × p`.
    pub values: Vec<f64>,
    pub durations: Vec<f64>,
    pub events: Vec<bool>,
    /// Columns z-scored with training statistics before fitting.
    pub standardize: Vec<bool>,
    /// `(patient_id, reason)` for every patient left out of the design.
    pub excluded: Vec<(String, String)>,
    pub reference_levels: Vec<String>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn cox_data(&self) -> Result<CoxData<'_>> {
        CoxData::new(&self.values, self.p(), &self.durations, &self.events)
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.p());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        DesignMatrix {
            patient_ids: rows.iter().map(|&r| self.patient_ids[r].clone()).collect(),
            columns: self.columns.clone(),
            values,
            durations: rows.iter().map(|&r| self.durations[r]).collect(),
            events: rows.iter().map(|&r| self.events[r]).collect(),
            standardize: self.standardize.clone(),
            excluded: vec![],
            reference_levels: self.reference_levels.clone(),
        }
    }

    /// Column-wise concatenation; both designs must list the same patients.
    pub fn hstack(&self, other: &DesignMatrix) -> Result<DesignMatrix> {
        if self.patient_ids != other.patient_ids {
            return Err(Error::InvalidArgument("designs list different patients".into()));
        }
        let mut out = self.clone();
        out.values.clear();
        for i in 0..self.n() {
            out.values.extend_from_slice(self.row(i));
            out.values.extend_from_slice(other.row(i));
        }
        out.columns.extend(other.columns.iter().cloned());
        out.standardize.extend(other.standardize.iter().copied());
        check_unique(&out.columns)?;
        Ok(out)
    }
}

fn check_unique(columns: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in columns {
        if !seen.insert(c) {
            return Err(Error::DuplicateId(c.clone()));
        }
    }
    Ok(())
}

/// Means and standard deviations of the standardized columns of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub active: Vec<bool>,
}

impl Standardizer {
    /// Statistics over `rows` of the design (population sd; constant columns get sd 1).
    pub fn fit(design: &DesignMatrix, rows: &[usize]) -> Self {
        let p = design.p();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        let mut sd = vec![1.0; p];
        for j in (0..p).filter(|&j| design.standardize[j]) {
            let m = rows.iter().map(|&r| design.row(r)[j]).sum::<f64>() / n;
            let v = rows.iter().map(|&r| (design.row(r)[j] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            sd[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        Self {
            mean,
            sd,
            active: design.standardize.clone(),
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| if self.active[j] { (v - self.mean[j]) / self.sd[j] } else { v })
            .collect()
    }

    pub fn apply(&self, design: &DesignMatrix) -> DesignMatrix {
        let mut out = design.clone();
        out.values = (0..design.n()).flat_map(|i| self.apply_row(design.row(i))).collect();
        out
    }
}

fn lookup(clinical: &ClinicalTable, names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| clinical.covariate_index(n))
}

/// Maps a patient's raw covariates to design columns, or names what is missing.
type BlockFn<'a> = Box<dyn Fn(&[Option<f64>]) -> std::result::Result<Vec<f64>, String> + 'a>;

/// Per-patient covariate block for one clinical baseline.
fn covariate_block(clinical: &ClinicalTable, set: CovariateSet) -> Result<(Vec<String>, BlockFn<'_>)> {
    match set {
        CovariateSet::Gleason => {
            if let Some(c) = lookup(clinical, &["gleason_grade", "grade_group", "gleason_grade_group", "gg"]) {
                let name = clinical.covariate_names()[c].clone();
                Ok((
                    (2..=5).map(|g| format!("GG{g}")).collect(),
                    Box::new(move |vals: &[Option<f64>]| {
                        let g = vals[c].ok_or_else(|| format!("missing {name}"))?;
                        if !(1.0..=5.0).contains(&g) || g.fract() != 0.0 {
                            return Err(format!("{name} must be an integer grade group 1-5, got {g}"));
                        }
                        Ok((2..=5).map(|k| if g as i64 == k { 1.0 } else { 0.0 }).collect())
                    }),
                ))
            } else {
                let cols: Vec<usize> = (2..=5)
                    .map(|g| {
                        lookup(clinical, &[&format!("GG{g}"), &format!("gg{g}")])
                            .ok_or_else(|| Error::MissingColumn(format!("gleason_grade or GG{g}")))
                    })
                    .collect::<Result<_>>()?;
                Ok((
                    (2..=5).map(|g| format!("GG{g}")).collect(),
                    Box::new(move |vals: &[Option<f64>]| {
                        cols.iter()
                            .zip(2..=5)
                            .map(|(&c, g)| vals[c].ok_or_else(|| format!("missing GG{g}")))
                            .collect()
                    }),
                ))
            }
        }
        CovariateSet::CapraS | CovariateSet::MskccS => {
            let (keys, display): (&[&str], &str) = if set == CovariateSet::CapraS {
                (&["capra_s", "CAPRA-S", "capra"], "CAPRA-S")
            } else {
                (&["mskcc_s", "MSKCC-S", "mskcc"], "MSKCC-S")
            };
            let c = lookup(clinical, keys).ok_or_else(|| Error::MissingColumn(keys[0].into()))?;
            Ok((
                vec![display.to_string()],
                Box::new(move |vals: &[Option<f64>]| {
                    vals[c].map(|v| vec![v]).ok_or_else(|| format!("missing {display}"))
                }),
            ))
        }
    }
}

/// Joins clinical data with cluster fractions into a survival design.
///
/// Columns are the clinical baseline (if any) followed by the selected
/// fraction columns when `include_fractions` is set. Patients missing from
/// either source or lacking a needed covariate are excluded and listed in
/// [`DesignMatrix::excluded`].
pub fn build_design_matrix(
    clinical: &ClinicalTable,
    fractions: &[ClusterFractions],
    selected: &[usize],
    covariates: Option<CovariateSet>,
    include_fractions: bool,
) -> Result<DesignMatrix> {
    let by_patient: BTreeMap<&str, &ClusterFractions> =
        fractions.iter().map(|f| (f.patient_id.as_str(), f)).collect();
    let k = fractions.first().map_or(0, |f| f.fractions.len());
    if include_fractions {
        if let Some(&c) = selected.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidArgument(format!("selected cluster {c} out of range for k={k}")));
        }
    }

    let block = covariates.map(|set| covariate_block(clinical, set)).transpose()?;
    let mut columns: Vec<String> = block.as_ref().map(|b| b.0.clone()).unwrap_or_default();
    let n_clinical = columns.len();
    if include_fractions {
        columns.extend(selected.iter().map(|&c| cluster_column(c)));
    }
    check_unique(&columns)?;

    let mut patients: Vec<&str> = clinical.records().iter().map(|r| r.patient_id.as_str()).collect();
    patients.sort_unstable();
    let mut design = DesignMatrix {
        patient_ids: vec![],
        standardize: (0..columns.len()).map(|j| j >= n_clinical).collect(),
        columns,
        values: vec![],
        durations: vec![],
        events: vec![],
        excluded: vec![],
        reference_levels: covariates.map(|c| c.reference_levels()).unwrap_or_default(),
    };
    for pid in patients {
        let rec = clinical.get(pid).unwrap();
        let Some(frac) = by_patient.get(pid) else {
            design.excluded.push((pid.to_string(), "no imaging data".into()));
            continue;
        };
        let mut row = match &block {
            Some((_, f)) => match f(&rec.covariates) {
                Ok(v) => v,
                Err(reason) => {
                    design.excluded.push((pid.to_string(), reason));
                    continue;
                }
            },
            None => vec![],
        };
        if include_fractions {
            row.extend(selected.iter().map(|&c| frac.fractions[c]));
        }
        design.patient_ids.push(pid.to_string());
        design.values.extend(row);
        design.durations.push(rec.duration);
        design.events.push(rec.event);
    }
    for pid in by_patient.keys().filter(|p| clinical.get(p).is_none()) {
        design.excluded.push((pid.to_string(), "no clinical data".into()));
    }
    if design.patient_ids.is_empty() {
        return Err(Error::InvalidArgument(
            "no patients present in both clinical and imaging data".into(),
        ));
    }
    Ok(design)
}
