//! Instrument construction: Z = 1 when a case's same-day emergency admission
//! count (excluding the case itself if it is an emergency) strictly exceeds
//! the hospital-year median of daily emergency counts.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use crate::domain::types::{HospitalId, PatientCase};
use crate::error::{Error, Result};

/// Per-day emergency admission counts and hospital-year medians, computed
/// once over a case list.
#[derive(Debug, Clone)]
pub struct EmergencyStats {
    day_counts: BTreeMap<(HospitalId, NaiveDate), u32>,
    medians: BTreeMap<(HospitalId, i32), f64>,
}

impl EmergencyStats {
    /// Counts emergencies per observed hospital-day (days that appear in the
    /// case list contribute a count, possibly zero) and takes the median of
    /// those daily counts within each hospital-year. No self-exclusion here;
    /// exclusion applies only when an individual case is scored.
    pub fn from_cases(cases: &[PatientCase]) -> Self {
        let mut day_counts: BTreeMap<(HospitalId, NaiveDate), u32> = BTreeMap::new();
        for c in cases {
            let e = day_counts
                .entry((c.hospital_id.clone(), c.admit_day))
                .or_insert(0);
            if c.is_emergency {
                *e += 1;
            }
        }
        let mut per_year: BTreeMap<(HospitalId, i32), Vec<u32>> = BTreeMap::new();
        for ((h, day), n) in &day_counts {
            per_year
                .entry((h.clone(), day.year()))
                .or_default()
                .push(*n);
        }
        let medians = per_year
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_unstable();
                (k, median_sorted(&v))
            })
            .collect();
        EmergencyStats {
            day_counts,
            medians,
        }
    }

    pub fn day_count(&self, hospital: &HospitalId, day: NaiveDate) -> u32 {
        self.day_counts
            .get(&(hospital.clone(), day))
            .copied()
            .unwrap_or(0)
    }

    pub fn median(&self, hospital: &HospitalId, year: i32) -> Result<f64> {
        self.medians
            .get(&(hospital.clone(), year))
            .copied()
            .ok_or_else(|| Error::MissingHospitalYear {
                hospital: hospital.to_string(),
                year,
            })
    }
}

fn median_sorted(sorted: &[u32]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// Fills Z for every case using precomputed stats. Errors if a case's
/// hospital-year has no median entry.
pub fn build_instrument_with(cases: &mut [PatientCase], stats: &EmergencyStats) -> Result<()> {
    for c in cases.iter_mut() {
        let median = stats.median(&c.hospital_id, c.year)?;
        let mut count = stats.day_count(&c.hospital_id, c.admit_day);
        if c.is_emergency {
            count = count.saturating_sub(1);
        }
        c.instrument = Some(u8::from(count as f64 > median));
    }
    Ok(())
}

/// Computes emergency stats from the cases themselves and fills Z.
/// Empty input is a no-op.
pub fn build_instrument(cases: &mut [PatientCase]) -> Result<()> {
    if cases.is_empty() {
        return Ok(());
    }
    let stats = EmergencyStats::from_cases(cases);
    build_instrument_with(cases, &stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::types::DiagnosisGroup;

    fn case(hospital: &str, day: &str, emergency: bool) -> PatientCase {
        PatientCase {
            case_id: format!("{hospital}-{day}-{emergency}"),
            hospital_id: hospital.into(),
            admit_day: day.parse().unwrap(),
            year: day[..4].parse().unwrap(),
            covariates: vec![],
            treatment: 0,
            instrument: None,
            outcome: 1,
            diagnosis_group: DiagnosisGroup::I2,
            is_emergency: emergency,
        }
    }

    /// Four days with emergency counts {3,5,2,8}; median 4.
    fn corpus() -> Vec<PatientCase> {
        let mut cases = Vec::new();
        let days = [("2015-01-01", 3), ("2015-01-02", 5), ("2015-01-03", 2), ("2015-01-04", 8)];
        for (day, n_emerg) in days {
            for _ in 0..n_emerg {
                cases.push(case("A", day, true));
            }
            cases.push(case("A", day, false)); // one non-emergency per day
        }
        cases
    }

    #[test]
    fn threshold_is_strict_exceeds() {
        let mut cases = corpus();
        build_instrument(&mut cases).unwrap();
        // median of {3,5,2,8} = (3+5)/2 = 4
        let z_of = |day: &str, emergency: bool| {
            cases
                .iter()
                .find(|c| c.admit_day.to_string() == day && c.is_emergency == emergency)
                .unwrap()
                .instrument
                .unwrap()
        };
        // non-emergency on the day with 8 -> 8 > 4 -> 1; on the day with 2 -> 0
        assert_eq!(z_of("2015-01-04", false), 1);
        assert_eq!(z_of("2015-01-03", false), 0);
        // emergency case on the day with 5: excluded count 4, 4 > 4 is false
        assert_eq!(z_of("2015-01-02", true), 0);
        // non-emergency case on the same day keeps the full count 5 > 4
        assert_eq!(z_of("2015-01-02", false), 1);
    }

    #[test]
    fn identical_daily_counts_give_all_zero() {
        let mut cases = Vec::new();
        for day in ["2015-02-01", "2015-02-02", "2015-02-03"] {
            for _ in 0..4 {
                cases.push(case("B", day, true));
            }
            cases.push(case("B", day, false));
        }
        build_instrument(&mut cases).unwrap();
        assert!(cases.iter().all(|c| c.instrument == Some(0)));
    }

    #[test]
    fn empty_input_is_noop() {
        let mut cases: Vec<PatientCase> = vec![];
        build_instrument(&mut cases).unwrap();
    }

    #[test]
    fn missing_hospital_year_names_the_key() {
        let stats = EmergencyStats::from_cases(&corpus());
        let mut other = vec![case("Z", "2019-06-01", false)];
        let err = build_instrument_with(&mut other, &stats).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Z") && msg.contains("2019"), "{msg}");
    }

    #[test]
    fn order_invariant() {
        let mut a = corpus();
        let mut b = corpus();
        b.reverse();
        build_instrument(&mut a).unwrap();
        build_instrument(&mut b).unwrap();
        for ca in &a {
            let cb = b.iter().find(|c| c.case_id == ca.case_id).unwrap();
            assert_eq!(ca.instrument, cb.instrument);
        }
    }
}
