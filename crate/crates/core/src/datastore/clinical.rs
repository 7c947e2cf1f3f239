use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::TileManifest;
use crate::error::{Error, Result};

const MISSING: &[&str] = &["", "NA", "na", "NaN", "nan", "null", "."];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub patient_id: String,
    /// Follow-up in years.
    pub duration: f64,
    /// Cancer-specific death observed.
    pub event: bool,
    /// Values aligned with [`ClinicalTable::covariate_names`]; `None` when missing.
    pub covariates: Vec<Option<f64>>,
}

impl ClinicalRecord {
    pub fn is_complete(&self) -> bool {
        self.covariates.iter().all(Option::is_some)
    }
}

/// Per-patient follow-up and covariates, kept in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalTable {
    covariate_names: Vec<String>,
    records: Vec<ClinicalRecord>,
    index: BTreeMap<String, usize>,
}

impl ClinicalTable {
    pub fn new(covariate_names: Vec<String>, records: Vec<ClinicalRecord>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if !(r.duration > 0.0 && r.duration.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "patient `{}`: duration must be positive, got {}",
                    r.patient_id, r.duration
                )));
            }
            if r.covariates.len() != covariate_names.len() {
                return Err(Error::InvalidArgument(format!(
                    "patient `{}`: {} covariates, table declares {}",
                    r.patient_id,
                    r.covariates.len(),
                    covariate_names.len()
                )));
            }
            if index.insert(r.patient_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.patient_id.clone()));
            }
        }
        Ok(Self {
            covariate_names,
            records,
            index,
        })
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn records(&self) -> &[ClinicalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn get(&self, patient_id: &str) -> Option<&ClinicalRecord> {
        self.index.get(patient_id).map(|&i| &self.records[i])
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn covariate(&self, patient_id: &str, name: &str) -> Option<f64> {
        let c = self.covariate_index(name)?;
        self.get(patient_id)?.covariates[c]
    }

    /// Patients with at least one missing covariate value.
    pub fn incomplete_patients(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.is_complete())
            .map(|r| r.patient_id.as_str())
            .collect()
    }
}

pub fn load_clinical(path: impl AsRef<Path>) -> Result<ClinicalTable> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (pid, dur, ev) = (col("patient_id")?, col("duration_years")?, col("event")?);
    let cov_cols: Vec<usize> = (0..headers.len()).filter(|c| ![pid, dur, ev].contains(c)).collect();
    let names: Vec<String> = cov_cols.iter().map(|&c| headers[c].trim().to_string()).collect();

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or_default().trim();
        let patient_id = field(pid).to_string();
        let duration: f64 = field(dur).parse().map_err(|_| {
            Error::format(path, format!("row {row}: bad duration_years `{}`", field(dur)))
        })?;
        if !(duration > 0.0) {
            return Err(Error::format(
                path,
                format!("row {row} (patient `{patient_id}`): duration_years must be > 0, got {duration}"),
            ));
        }
        let event = match field(ev) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format(
                    path,
                    format!("row {row} (patient `{patient_id}`): event must be 0 or 1, got `{other}`"),
                ))
            }
        };
        let mut covariates = Vec::with_capacity(cov_cols.len());
        for &c in &cov_cols {
            let s = field(c);
            if MISSING.contains(&s) {
                covariates.push(None);
            } else {
                let v: f64 = s.parse().map_err(|_| {
                    Error::format(path, format!("row {row}, column `{}`: cannot parse `{s}`", headers[c].trim()))
                })?;
                covariates.push(v.is_finite().then_some(v));
            }
        }
        records.push(ClinicalRecord {
            patient_id,
            duration,
            event,
            covariates,
        });
    }
    ClinicalTable::new(names, records)
}

pub fn write_clinical(path: impl AsRef<Path>, table: &ClinicalTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["patient_id".to_string(), "duration_years".into(), "event".into()];
    header.extend(table.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for r in &table.records {
        let mut rec = vec![
            r.patient_id.clone(),
            r.duration.to_string(),
            u8::from(r.event).to_string(),
        ];
        rec.extend(r.covariates.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Patients present in one source but not the other. Nothing is dropped silently.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinReport {
    pub matched: Vec<String>,
    pub clinical_only: Vec<String>,
    pub imaging_only: Vec<String>,
    pub incomplete_covariates: Vec<String>,
}

pub fn join_report(clinical: &ClinicalTable, manifest: &TileManifest) -> JoinReport {
    let imaging: BTreeSet<&str> = manifest.patient_ids();
    let clin: BTreeSet<&str> = clinical.index.keys().map(String::as_str).collect();
    let own = |it: &mut dyn Iterator<Item = &&str>| it.map(|s| s.to_string()).collect::<Vec<_>>();
    JoinReport {
        matched: own(&mut clin.intersection(&imaging)),
        clinical_only: own(&mut clin.difference(&imaging)),
        imaging_only: own(&mut imaging.difference(&clin)),
        incomplete_covariates: {
            let mut v: Vec<String> = clinical.incomplete_patients().into_iter().map(String::from).collect();
            v.sort();
            v
        },
    }
}
