//! Feasibility predicate for assignment configurations: bed capacity in both
//! units plus an optional reassignment budget.

use crate::domain::types::{AssignmentConfig, CapacityLimits, DayCohort, Unit};
use crate::error::Result;

/// Reassignment budget: at most floor(rho * P) patients may differ from the
/// observed assignment. The small epsilon absorbs float representation error
/// in products like 0.1 * 10.
pub fn reassignment_budget(rho: f64, cohort_size: usize) -> usize {
    (rho * cohort_size as f64 + 1e-9).floor() as usize
}

/// True iff `cfg` fits both unit capacities on top of the baseline busyness
/// and, when `rho` is given, stays within the reassignment budget relative to
/// the observed assignment.
pub fn is_feasible(
    cfg: &AssignmentConfig,
    cohort: &DayCohort,
    caps: &CapacityLimits,
    rho: Option<f64>,
) -> Result<bool> {
    let cap_intmed = caps.get(&cohort.hospital_id, cohort.year(), Unit::IntMed)?;
    let cap_surg = caps.get(&cohort.hospital_id, cohort.year(), Unit::Surgical)?;
    let n_intmed = cfg.n_intmed() as u32;
    let n_surg = cfg.n_surg() as u32;
    if cohort.baseline_busy_intmed + n_intmed > cap_intmed {
        return Ok(false);
    }
    if cohort.baseline_busy_surg + n_surg > cap_surg {
        return Ok(false);
    }
    if let Some(rho) = rho {
        let budget = reassignment_budget(rho, cohort.size());
        if cfg.reassignments_from(&cohort.observed_config()) > budget {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::types::{DiagnosisGroup, HospitalId, PatientCase};

    fn cohort(treatments: &[u8], baseline: (u32, u32)) -> DayCohort {
        let day: chrono::NaiveDate = "2015-05-01".parse().unwrap();
        DayCohort {
            hospital_id: HospitalId::from("A"),
            day,
            cases: treatments
                .iter()
                .enumerate()
                .map(|(i, &w)| PatientCase {
                    case_id: format!("c{i}"),
                    hospital_id: HospitalId::from("A"),
                    admit_day: day,
                    year: 2015,
                    covariates: vec![],
                    treatment: w,
                    instrument: Some(0),
                    outcome: 1,
                    diagnosis_group: DiagnosisGroup::C1,
                    is_emergency: false,
                })
                .collect(),
            baseline_busy_intmed: baseline.0,
            baseline_busy_surg: baseline.1,
        }
    }

    fn caps(intmed: u32, surg: u32) -> CapacityLimits {
        let mut c = CapacityLimits::new();
        c.set(HospitalId::from("A"), 2015, Unit::IntMed, intmed);
        c.set(HospitalId::from("A"), 2015, Unit::Surgical, surg);
        c
    }

    #[test]
    fn capacity_violation() {
        let co = cohort(&[1, 0, 0], (0, 0));
        let cfg = AssignmentConfig::new(vec![true, true, true]);
        assert!(!is_feasible(&cfg, &co, &caps(2, 2), None).unwrap());
    }

    #[test]
    fn observed_with_zero_rho_is_feasible() {
        let co = cohort(&[1, 0, 1], (0, 0));
        assert!(is_feasible(&co.observed_config(), &co, &caps(5, 5), Some(0.0)).unwrap());
    }

    #[test]
    fn rho_budget_floor() {
        let co = cohort(&[0; 10], (0, 0));
        let mut one_flip = vec![false; 10];
        one_flip[3] = true;
        let mut two_flips = one_flip.clone();
        two_flips[7] = true;
        let caps = caps(20, 20);
        assert!(is_feasible(&AssignmentConfig::new(one_flip), &co, &caps, Some(0.10)).unwrap());
        assert!(!is_feasible(&AssignmentConfig::new(two_flips), &co, &caps, Some(0.10)).unwrap());
    }

    #[test]
    fn missing_capacity_key_errors() {
        let co = cohort(&[1], (0, 0));
        let empty = CapacityLimits::new();
        assert!(is_feasible(&co.observed_config(), &co, &empty, None).is_err());
    }
}
