//! Day-based random train/test splitting. Every case of a hospital-day lands
//! wholly in one partition.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::types::{DaySplit, HospitalId};
use crate::error::{Error, Result};

/// Splits deduplicated hospital-days into train/test. `fraction` is the
/// train share and must lie strictly inside (0, 1); the train count is
/// `round(fraction * n)`, so the realized share is within one day of the
/// target. Deterministic for a fixed seed.
pub fn split_days(
    days: &[(HospitalId, NaiveDate)],
    fraction: f64,
    seed: u64,
) -> Result<DaySplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0,1), got {fraction}"
        )));
    }
    if days.is_empty() {
        return Err(Error::Data("split_days: empty day list".into()));
    }
    let mut uniq: Vec<(HospitalId, NaiveDate)> = days.to_vec();
    uniq.sort();
    uniq.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniq.shuffle(&mut rng);

    let n = uniq.len();
    let n_train = ((fraction * n as f64).round() as usize).clamp(0, n);
    let (train, test) = uniq.split_at(n_train);
    let mut train_days = train.to_vec();
    let mut test_days = test.to_vec();
    train_days.sort();
    test_days.sort();
    Ok(DaySplit {
        train_days,
        test_days,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<(HospitalId, NaiveDate)> {
        (0..n)
            .map(|i| {
                (
                    HospitalId::from("A"),
                    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Days::new(i as u64),
                )
            })
            .collect()
    }

    #[test]
    fn four_days_three_train() {
        let s = split_days(&days(4), 0.75, 7).unwrap();
        assert_eq!(s.train_days.len(), 3);
        assert_eq!(s.test_days.len(), 1);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = split_days(&days(40), 0.75, 99).unwrap();
        let b = split_days(&days(40), 0.75, 99).unwrap();
        assert_eq!(a.train_days, b.train_days);
        assert_eq!(a.test_days, b.test_days);
    }

    #[test]
    fn open_interval_contract() {
        assert!(split_days(&days(4), 1.0, 0).is_err());
        assert!(split_days(&days(4), 0.0, 0).is_err());
    }

    #[test]
    fn partitions_are_disjoint_and_cover() {
        let d = days(17);
        let s = split_days(&d, 0.6, 3).unwrap();
        let mut all = s.train_days.clone();
        all.extend(s.test_days.clone());
        all.sort();
        let mut expect = d.clone();
        expect.sort();
        assert_eq!(all, expect);
        for t in &s.train_days {
            assert!(!s.test_days.contains(t));
        }
    }
}
