//! Per-cohort effect tables: IATE point estimates and lower bounds for every
//! patient at every internal-medicine headcount, with busyness slots set to
//! the configuration-induced occupancy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{case_bounds, BoundMethod};
use crate::domain::{AssignmentConfig, CovariateSchema, DayCohort};
use crate::error::{Error, Result};
use crate::forest::IvForest;

/// P x (P+1) tables: entry `[i][j]` is patient i's value when j patients go
/// to internal medicine, i.e. busyness (baseline_intmed + j,
/// baseline_surg + P - j).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortEffects {
    pub tau_point: Vec<Vec<f64>>,
    pub lower_freq: Vec<Vec<f64>>,
    pub lower_manski: Vec<Vec<f64>>,
    pub lower_pearl: Vec<Vec<f64>>,
}

impl CohortEffects {
    pub fn n_patients(&self) -> usize {
        self.tau_point.len()
    }

    pub fn from_tables(
        tau_point: Vec<Vec<f64>>,
        lower_freq: Vec<Vec<f64>>,
        lower_manski: Vec<Vec<f64>>,
        lower_pearl: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let p = tau_point.len();
        for table in [&tau_point, &lower_freq, &lower_manski, &lower_pearl] {
            if table.len() != p || table.iter().any(|row| row.len() != p + 1) {
                return Err(Error::Data(format!(
                    "effect tables must be {p} x {}",
                    p + 1
                )));
            }
        }
        Ok(CohortEffects {
            tau_point,
            lower_freq,
            lower_manski,
            lower_pearl,
        })
    }

    /// A table where every lower bound equals the point estimate minus zero
    /// (point tables reused); handy for tests.
    pub fn point_only(tau_point: Vec<Vec<f64>>) -> Result<Self> {
        let copy = tau_point.clone();
        Self::from_tables(tau_point, copy.clone(), copy.clone(), copy)
    }

    pub fn table(&self, bound: Option<BoundMethod>) -> &Vec<Vec<f64>> {
        match bound {
            None => &self.tau_point,
            Some(BoundMethod::Frequentist) => &self.lower_freq,
            Some(BoundMethod::Manski) => &self.lower_manski,
            Some(BoundMethod::Pearl) => &self.lower_pearl,
        }
    }

    /// Predicts all four tables for a cohort. Per headcount j the busyness
    /// slots are overwritten with (baseline_intmed + j, baseline_surg + P - j).
    pub fn from_forest(
        forest: &IvForest,
        cohort: &DayCohort,
        schema: &CovariateSchema,
        alpha: f64,
    ) -> Result<Self> {
        let p = cohort.size();
        let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = cohort
            .cases
            .par_iter()
            .map(|case| -> Result<_> {
                let mut tau = Vec::with_capacity(p + 1);
                let mut lf = Vec::with_capacity(p + 1);
                let mut lm = Vec::with_capacity(p + 1);
                let mut lp = Vec::with_capacity(p + 1);
                let mut x = case.covariates.clone();
                for j in 0..=p {
                    schema.set_busyness(
                        &mut x,
                        (cohort.baseline_busy_intmed as usize + j) as f64,
                        (cohort.baseline_busy_surg as usize + (p - j)) as f64,
                    );
                    let cb = case_bounds(forest, &x, alpha)?;
                    tau.push(cb.estimate.tau_hat);
                    lf.push(cb.frequentist.lower);
                    lm.push(cb.manski.lower);
                    lp.push(cb.pearl.lower);
                }
                Ok((tau, lf, lm, lp))
            })
            .collect::<Result<_>>()?;
        let mut tau_point = Vec::with_capacity(p);
        let mut lower_freq = Vec::with_capacity(p);
        let mut lower_manski = Vec::with_capacity(p);
        let mut lower_pearl = Vec::with_capacity(p);
        for (tau, lf, lm, lp) in rows {
            tau_point.push(tau);
            lower_freq.push(lf);
            lower_manski.push(lm);
            lower_pearl.push(lp);
        }
        Ok(CohortEffects {
            tau_point,
            lower_freq,
            lower_manski,
            lower_pearl,
        })
    }
}

/// Welfare of a configuration: the sum of table values over patients placed
/// in internal medicine, at the configuration's headcount column. Surgical
/// placements contribute zero (effects are relative to surgical care).
pub fn config_welfare(
    cfg: &AssignmentConfig,
    effects: &CohortEffects,
    bound: Option<BoundMethod>,
) -> f64 {
    let table = effects.table(bound);
    let j = cfg.n_intmed();
    let mut total = 0.0;
    for i in 0..cfg.len() {
        if cfg.bit(i) {
            total += table[i][j];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_in_j(taus: &[f64]) -> CohortEffects {
        let p = taus.len();
        CohortEffects::point_only(taus.iter().map(|&t| vec![t; p + 1]).collect()).unwrap()
    }

    #[test]
    fn welfare_of_named_config() {
        // tau = (0.1, -0.2, 0.3), pi = (1,0,1) -> 0.4; enumeration over all 8
        // configurations confirms it is also the maximum.
        let effects = constant_in_j(&[0.1, -0.2, 0.3]);
        let cfg = AssignmentConfig::new(vec![true, false, true]);
        let w = config_welfare(&cfg, &effects, None);
        assert!((w - 0.4).abs() < 1e-12);
        let best = (0..8u64)
            .map(|m| config_welfare(&AssignmentConfig::from_mask(m, 3), &effects, None))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - 0.4).abs() < 1e-12);
    }

    #[test]
    fn all_surgical_is_zero() {
        let effects = constant_in_j(&[0.5, 0.5]);
        let cfg = AssignmentConfig::new(vec![false, false]);
        assert_eq!(config_welfare(&cfg, &effects, None), 0.0);
    }

    #[test]
    fn single_patient() {
        let effects = CohortEffects::point_only(vec![vec![0.0, 0.5]]).unwrap();
        let cfg = AssignmentConfig::new(vec![true]);
        assert!((config_welfare(&cfg, &effects, None) - 0.5).abs() < 1e-12);
    }
}
