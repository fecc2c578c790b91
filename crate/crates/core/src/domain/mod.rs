//! Shared data model and the operations every other module builds on:
//! instrument construction, busyness, day splitting and feasibility.

pub mod feasible;
pub mod instrument;
pub mod occupancy;
pub mod schema;
pub mod split;
pub mod types;

pub use feasible::{is_feasible, reassignment_budget};
pub use instrument::{build_instrument, build_instrument_with, EmergencyStats};
pub use occupancy::{OccupancyIndex, StayRecord};
pub use schema::{CovariateSchema, BUSY_INTMED_COL, BUSY_SURG_COL};
pub use split::split_days;
pub use types::{
    AssignmentConfig, CapacityLimits, DayCohort, DaySplit, DiagnosisGroup, HospitalId,
    PatientCase, Unit,
};

use std::collections::BTreeMap;

/// Groups cases into per-hospital-day cohorts with baseline busyness from the
/// occupancy index. Cohort case order follows case_id for determinism.
pub fn build_cohorts(cases: &[PatientCase], occupancy: &OccupancyIndex) -> Vec<DayCohort> {
    let mut grouped: BTreeMap<(HospitalId, chrono::NaiveDate), Vec<PatientCase>> = BTreeMap::new();
    for c in cases {
        grouped
            .entry((c.hospital_id.clone(), c.admit_day))
            .or_default()
            .push(c.clone());
    }
    grouped
        .into_iter()
        .map(|((hospital_id, day), mut cases)| {
            cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
            let baseline_busy_intmed = occupancy.busyness(&hospital_id, Unit::IntMed, day);
            let baseline_busy_surg = occupancy.busyness(&hospital_id, Unit::Surgical, day);
            DayCohort {
                hospital_id,
                day,
                cases,
                baseline_busy_intmed,
                baseline_busy_surg,
            }
        })
        .collect()
}
