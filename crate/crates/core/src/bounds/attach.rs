//! Per-case bound attachment: frequentist, Manski and IV bounds, all built
//! from the same forest-weighted neighborhood so the three methods condition
//! on covariates identically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::joint::JointProbs;
use crate::bounds::pair::{frequentist_bounds, manski_bounds, pearl_bounds, BoundPair};
use crate::error::Result;
use crate::forest::{EffectEstimate, IvForest};

/// Minimum per-arm neighborhood weight before the joint-probability
/// estimate is considered degenerate.
pub const MIN_ARM_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseBounds {
    pub estimate: EffectEstimate,
    pub frequentist: BoundPair,
    pub manski: BoundPair,
    pub pearl: BoundPair,
    /// IV bound terms crossed and were collapsed to the midpoint.
    pub pearl_crossed: bool,
}

/// Weight-smoothed per-arm conditionals around one query point.
pub fn estimate_joint_probs(forest: &IvForest, x: &[f64]) -> Result<JointProbs> {
    let weights = forest.weights(x);
    JointProbs::from_weighted_cases(
        &weights,
        &forest.y,
        &forest.w,
        &forest.z,
        MIN_ARM_WEIGHT,
    )
}

/// Manski inputs (mu1, mu0, p1) from a weight vector. An arm with almost no
/// weight falls back to an uninformative mean of 0.5; the interval stays
/// valid because Manski bounds have unit width regardless.
pub fn manski_inputs(forest: &IvForest, weights: &[f64]) -> (f64, f64, f64) {
    let mut w1 = 0.0;
    let mut w0 = 0.0;
    let mut y1 = 0.0;
    let mut y0 = 0.0;
    let mut total = 0.0;
    for i in 0..forest.n_train {
        let a = weights[i];
        if a == 0.0 {
            continue;
        }
        total += a;
        if forest.w[i] == 1 {
            w1 += a;
            y1 += a * forest.y[i] as f64;
        } else {
            w0 += a;
            y0 += a * forest.y[i] as f64;
        }
    }
    if total <= 0.0 {
        return (0.5, 0.5, 0.5);
    }
    let p1 = (w1 / total).clamp(0.0, 1.0);
    let mu1 = if w1 > MIN_ARM_WEIGHT { (y1 / w1).clamp(0.0, 1.0) } else { 0.5 };
    let mu0 = if w0 > MIN_ARM_WEIGHT { (y0 / w0).clamp(0.0, 1.0) } else { 0.5 };
    (mu1, mu0, p1)
}

/// Computes all three bound pairs for one query point.
pub fn case_bounds(forest: &IvForest, x: &[f64], alpha: f64) -> Result<CaseBounds> {
    let estimate = forest.predict(x)?;
    let frequentist = frequentist_bounds(&estimate, alpha)?;
    let weights = forest.weights(x);
    let (mu1, mu0, p1) = manski_inputs(forest, &weights);
    let manski = manski_bounds(mu1, mu0, p1)?;
    let jp = JointProbs::from_weighted_cases(
        &weights,
        &forest.y,
        &forest.w,
        &forest.z,
        MIN_ARM_WEIGHT,
    )?;
    let pearl = pearl_bounds(&jp)?;
    Ok(CaseBounds {
        estimate,
        frequentist,
        manski,
        pearl: pearl.pair,
        pearl_crossed: pearl.crossed,
    })
}

/// Per-case bounds for a batch of query points.
pub fn attach_bounds(
    forest: &IvForest,
    queries: &[Vec<f64>],
    alpha: f64,
) -> Result<Vec<CaseBounds>> {
    queries
        .par_iter()
        .map(|q| case_bounds(forest, q, alpha))
        .collect()
}

/// Aggregate lower/upper means per method, the shape of the bound summary
/// table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSummary {
    pub frequentist: (f64, f64),
    pub manski: (f64, f64),
    pub pearl: (f64, f64),
    pub n_pearl_crossed: usize,
}

pub fn summarize_bounds(bounds: &[CaseBounds]) -> BoundSummary {
    let n = bounds.len().max(1) as f64;
    let mut sums = [(0.0f64, 0.0f64); 3];
    let mut crossed = 0;
    for b in bounds {
        sums[0].0 += b.frequentist.lower;
        sums[0].1 += b.frequentist.upper;
        sums[1].0 += b.manski.lower;
        sums[1].1 += b.manski.upper;
        sums[2].0 += b.pearl.lower;
        sums[2].1 += b.pearl.upper;
        if b.pearl_crossed {
            crossed += 1;
        }
    }
    BoundSummary {
        frequentist: (sums[0].0 / n, sums[0].1 / n),
        manski: (sums[1].0 / n, sums[1].1 / n),
        pearl: (sums[2].0 / n, sums[2].1 / n),
        n_pearl_crossed: crossed,
    }
}
