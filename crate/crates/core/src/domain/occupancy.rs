//! Unit occupancy: stay intervals, daily busyness (same-day admissions
//! excluded, so the count is the pre-placement baseline), and capacity
//! derivation from observed maxima.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::types::{CapacityLimits, HospitalId, Unit};
use crate::error::{Error, Result};

/// One occupied-bed interval. Inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StayRecord {
    pub hospital_id: HospitalId,
    pub unit: Unit,
    pub admit_day: NaiveDate,
    pub discharge_day: NaiveDate,
}

impl StayRecord {
    pub fn validate(&self) -> Result<()> {
        if self.admit_day > self.discharge_day {
            return Err(Error::Data(format!(
                "stay in {}/{} has admit_day {} after discharge_day {}",
                self.hospital_id, self.unit, self.admit_day, self.discharge_day
            )));
        }
        Ok(())
    }
}

/// Day-indexed occupancy counts per (hospital, unit), built once from a stay
/// list so queries are O(log n).
#[derive(Debug, Default)]
pub struct OccupancyIndex {
    /// day -> (stays covering the day, stays admitted on the day)
    counts: BTreeMap<(HospitalId, Unit), BTreeMap<NaiveDate, (u32, u32)>>,
    warnings: std::sync::Mutex<Vec<String>>,
}

impl OccupancyIndex {
    pub fn build(stays: &[StayRecord]) -> Result<Self> {
        let mut counts: BTreeMap<(HospitalId, Unit), BTreeMap<NaiveDate, (u32, u32)>> =
            BTreeMap::new();
        for s in stays {
            s.validate()?;
            let per_day = counts.entry((s.hospital_id.clone(), s.unit)).or_default();
            let mut day = s.admit_day;
            loop {
                let e = per_day.entry(day).or_insert((0, 0));
                e.0 += 1;
                if day == s.admit_day {
                    e.1 += 1;
                }
                if day == s.discharge_day {
                    break;
                }
                day = day.succ_opt().expect("date overflow");
            }
        }
        Ok(OccupancyIndex {
            counts,
            warnings: Default::default(),
        })
    }

    /// Pre-placement busyness: stays containing the query day minus stays
    /// admitted on the query day. Unknown (hospital, unit) keys return 0 and
    /// leave a warning record.
    pub fn busyness(&self, hospital: &HospitalId, unit: Unit, day: NaiveDate) -> u32 {
        match self.counts.get(&(hospital.clone(), unit)) {
            Some(per_day) => per_day.get(&day).map(|(c, a)| c - a).unwrap_or(0),
            None => {
                self.warnings
                    .lock()
                    .expect("warnings lock")
                    .push(format!("no occupancy data for ({hospital}, {unit})"));
                0
            }
        }
    }

    /// Total occupancy including same-day admissions.
    pub fn occupancy(&self, hospital: &HospitalId, unit: Unit, day: NaiveDate) -> u32 {
        match self.counts.get(&(hospital.clone(), unit)) {
            Some(per_day) => per_day.get(&day).map(|(c, _)| *c).unwrap_or(0),
            None => 0,
        }
    }

    pub fn take_warnings(&self) -> Vec<String> {
        std::mem::take(&mut self.warnings.lock().expect("warnings lock"))
    }

    /// Capacity per (hospital, year, unit) as the maximum observed daily
    /// occupancy. With caps defined this way the observed assignment is
    /// always feasible.
    pub fn derive_capacities(&self) -> CapacityLimits {
        let mut caps = CapacityLimits::new();
        let mut maxima: BTreeMap<(HospitalId, i32, Unit), u32> = BTreeMap::new();
        for ((h, u), per_day) in &self.counts {
            for (day, (c, _)) in per_day {
                let e = maxima.entry((h.clone(), day.year(), *u)).or_insert(0);
                *e = (*e).max(*c);
            }
        }
        for ((h, y, u), m) in maxima {
            caps.set(h, y, u, m);
        }
        caps
    }

    /// All days present in the index for a hospital/unit, for reporting.
    pub fn days(&self, hospital: &HospitalId, unit: Unit) -> Vec<NaiveDate> {
        self.counts
            .get(&(hospital.clone(), unit))
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }
}
