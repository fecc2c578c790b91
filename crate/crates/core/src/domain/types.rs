//! Core data model: patient episodes, day cohorts, assignment configurations,
//! capacity limits and train/test day splits.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hospital identifier (the study covers five sites, A through E, but any
/// short label is accepted on ingest).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HospitalId(pub String);

impl fmt::Display for HospitalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for HospitalId {
    fn from(s: &str) -> Self {
        HospitalId(s.to_string())
    }
}

/// Ward kind. Treatment W = 1 corresponds to internal medicine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    IntMed,
    Surgical,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::IntMed => "intmed",
            Unit::Surgical => "surg",
        }
    }

    pub fn parse(s: &str) -> Result<Unit> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intmed" | "internal_medicine" | "1" => Ok(Unit::IntMed),
            "surg" | "surgical" | "0" => Ok(Unit::Surgical),
            other => Err(Error::Data(format!("unknown unit '{other}'"))),
        }
    }

    pub fn from_treatment(w: u8) -> Unit {
        if w == 1 {
            Unit::IntMed
        } else {
            Unit::Surgical
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// The nine ICD-10 diagnosis groups retained in the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosisGroup {
    I2,
    I3,
    I6,
    I7,
    C1,
    C2,
    C3,
    C4,
    C7,
}

impl DiagnosisGroup {
    pub const ALL: [DiagnosisGroup; 9] = [
        DiagnosisGroup::I2,
        DiagnosisGroup::I3,
        DiagnosisGroup::I6,
        DiagnosisGroup::I7,
        DiagnosisGroup::C1,
        DiagnosisGroup::C2,
        DiagnosisGroup::C3,
        DiagnosisGroup::C4,
        DiagnosisGroup::C7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosisGroup::I2 => "I2",
            DiagnosisGroup::I3 => "I3",
            DiagnosisGroup::I6 => "I6",
            DiagnosisGroup::I7 => "I7",
            DiagnosisGroup::C1 => "C1",
            DiagnosisGroup::C2 => "C2",
            DiagnosisGroup::C3 => "C3",
            DiagnosisGroup::C4 => "C4",
            DiagnosisGroup::C7 => "C7",
        }
    }

    pub fn parse(s: &str) -> Result<DiagnosisGroup> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| Error::Data(format!("unknown diagnosis_group '{s}'")))
    }
}

impl fmt::Display for DiagnosisGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// One inpatient episode.
///
/// `covariates` is laid out per the run configuration's covariate schema;
/// the two busyness slots sit at the schema's declared indices and hold the
/// pre-placement occupancy of each unit on the admission day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientCase {
    pub case_id: String,
    pub hospital_id: HospitalId,
    pub admit_day: NaiveDate,
    pub year: i32,
    pub covariates: Vec<f64>,
    /// Treatment: 1 = internal medicine NCU, 0 = surgical NCU.
    pub treatment: u8,
    /// Instrument: 1 = above-median same-day emergency admissions. `None`
    /// until `build_instrument` has run (ingest without a z column).
    pub instrument: Option<u8>,
    /// Outcome: 1 = survived to discharge, 0 = died.
    pub outcome: u8,
    pub diagnosis_group: DiagnosisGroup,
    pub is_emergency: bool,
}

impl PatientCase {
    pub fn instrument_or_err(&self) -> Result<u8> {
        self.instrument.ok_or_else(|| {
            Error::Data(format!(
                "case {} has no instrument; run build_instrument first",
                self.case_id
            ))
        })
    }
}

/// All cases of one hospital-day plus the pre-placement busyness of both
/// units (same-day admissions excluded).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayCohort {
    pub hospital_id: HospitalId,
    pub day: NaiveDate,
    pub cases: Vec<PatientCase>,
    pub baseline_busy_intmed: u32,
    pub baseline_busy_surg: u32,
}

impl DayCohort {
    pub fn size(&self) -> usize {
        self.cases.len()
    }

    pub fn year(&self) -> i32 {
        self.day.year()
    }

    /// The assignment the hospital actually made.
    pub fn observed_config(&self) -> AssignmentConfig {
        AssignmentConfig::new(self.cases.iter().map(|c| c.treatment == 1).collect())
    }
}

/// A binary assignment vector over one cohort: bit i = 1 places patient i in
/// internal medicine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssignmentConfig {
    bits: Vec<bool>,
}

impl AssignmentConfig {
    pub fn new(bits: Vec<bool>) -> Self {
        AssignmentConfig { bits }
    }

    pub fn from_mask(mask: u64, len: usize) -> Self {
        AssignmentConfig {
            bits: (0..len).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Count assigned to internal medicine.
    pub fn n_intmed(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Count assigned to the surgical unit.
    pub fn n_surg(&self) -> usize {
        self.len() - self.n_intmed()
    }

    /// Positions where this configuration differs from `other`.
    pub fn reassignments_from(&self, other: &AssignmentConfig) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// "0101" style rendering, patient order.
    pub fn as_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Per (hospital, year, unit) bed caps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CapacityLimits {
    caps: BTreeMap<(HospitalId, i32, Unit), u32>,
}

impl CapacityLimits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, hospital: HospitalId, year: i32, unit: Unit, cap: u32) {
        self.caps.insert((hospital, year, unit), cap);
    }

    pub fn get(&self, hospital: &HospitalId, year: i32, unit: Unit) -> Result<u32> {
        self.caps
            .get(&(hospital.clone(), year, unit))
            .copied()
            .ok_or_else(|| Error::Data(format!("no capacity for ({hospital}, {year}, {unit})")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(HospitalId, i32, Unit), &u32)> {
        self.caps.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }
}

/// Day-level train/test partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DaySplit {
    pub train_days: Vec<(HospitalId, NaiveDate)>,
    pub test_days: Vec<(HospitalId, NaiveDate)>,
    pub seed: u64,
}

impl DaySplit {
    pub fn is_train(&self, hospital: &HospitalId, day: NaiveDate) -> bool {
        self.train_days
            .iter()
            .any(|(h, d)| h == hospital && *d == day)
    }

    pub fn is_test(&self, hospital: &HospitalId, day: NaiveDate) -> bool {
        self.test_days
            .iter()
            .any(|(h, d)| h == hospital && *d == day)
    }
}
