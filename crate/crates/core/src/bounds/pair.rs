//! Bound pairs and the closed-form bound constructions: frequentist
//! confidence sets, Manski worst-case bounds, and instrumental-variable
//! bounds from the response-type linear program's dual vertices.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::joint::JointProbs;
use crate::forest::EffectEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundMethod {
    Frequentist,
    Manski,
    Pearl,
}

impl BoundMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMethod::Frequentist => "frequentist",
            BoundMethod::Manski => "manski",
            BoundMethod::Pearl => "pearl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundMethod,
}

impl BoundPair {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// tau_hat +/- z_{alpha/2} * sqrt(sigma2_hat).
pub fn frequentist_bounds(est: &EffectEstimate, alpha: f64) -> Result<BoundPair> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    if est.sigma2_hat < 0.0 {
        return Err(Error::Numeric("negative variance".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(1.0 - alpha / 2.0);
    let half = z * est.sigma2_hat.sqrt();
    Ok(BoundPair {
        lower: est.tau_hat - half,
        upper: est.tau_hat + half,
        method: BoundMethod::Frequentist,
    })
}

/// Worst-case bounds from observed conditional means and treatment shares:
/// E[Y(1)] in [mu1*p1, mu1*p1 + p0], E[Y(0)] in [mu0*p0, mu0*p0 + p1],
/// tau in [lower(1) - upper(0), upper(1) - lower(0)]. For a binary outcome
/// the width is exactly p0 + p1 = 1.
pub fn manski_bounds(mu1: f64, mu0: f64, p1: f64) -> Result<BoundPair> {
    for (name, v) in [("mu1", mu1), ("mu0", mu0), ("p1", p1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Numeric(format!("manski input {name}={v} outside [0,1]")));
        }
    }
    let p0 = 1.0 - p1;
    let y1_lower = mu1 * p1;
    let y1_upper = mu1 * p1 + p0;
    let y0_lower = mu0 * p0;
    let y0_upper = mu0 * p0 + p1;
    Ok(BoundPair {
        lower: y1_lower - y0_upper,
        upper: y1_upper - y0_lower,
        method: BoundMethod::Manski,
    })
}

/// IV bounds plus a flag set when estimated probabilities make the formula
/// terms cross; the interval then collapses to the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearlBounds {
    pub pair: BoundPair,
    pub crossed: bool,
}

// Dual vertices of the response-type LP, derived once by exact enumeration
// (16 response types: 4 compliance behaviours x 4 potential-outcome pairs,
// constrained to match the per-arm cell probabilities). Each row is
// (constant, coefficients over cells in the order
// p000, p001, p010, p011, p100, p101, p110, p111) with subscripts (y, w, z).
// Every row is a valid affine bound for the treatment effect; the max of the
// lower rows and min of the upper rows are sharp.
const PEARL_LOWER_TERMS: [[f64; 9]; 8] = [
    [-2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
    [-2.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0],
    [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [-2.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0],
    [-2.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0],
    [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
];

const PEARL_UPPER_TERMS: [[f64; 9]; 8] = [
    [-1.0, 2.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0, 1.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [-1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [-1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 0.0, 1.0, 2.0],
    [-1.0, 2.0, 1.0, 0.0, 1.0, 1.0, 0.0, 2.0, 0.0],
    [-1.0, 1.0, 2.0, 1.0, 0.0, 0.0, 1.0, 0.0, 2.0],
];

fn eval_term(term: &[f64; 9], cells: &[f64; 8]) -> f64 {
    term[0] + term[1..].iter().zip(cells).map(|(c, p)| c * p).sum::<f64>()
}

/// Evaluates the IV bound term set on validated per-arm conditionals.
/// Clamped to [-1, 1]; crossing intervals (possible with estimated inputs)
/// collapse to their midpoint with `crossed` set.
pub fn pearl_bounds(jp: &JointProbs) -> Result<PearlBounds> {
    jp.validate()?;
    let cells = jp.cell_array();
    let lower = PEARL_LOWER_TERMS
        .iter()
        .map(|t| eval_term(t, &cells))
        .fold(f64::NEG_INFINITY, f64::max)
        .clamp(-1.0, 1.0);
    let upper = PEARL_UPPER_TERMS
        .iter()
        .map(|t| eval_term(t, &cells))
        .fold(f64::INFINITY, f64::min)
        .clamp(-1.0, 1.0);
    if lower > upper {
        let mid = 0.5 * (lower + upper);
        return Ok(PearlBounds {
            pair: BoundPair {
                lower: mid,
                upper: mid,
                method: BoundMethod::Pearl,
            },
            crossed: true,
        });
    }
    Ok(PearlBounds {
        pair: BoundPair {
            lower,
            upper,
            method: BoundMethod::Pearl,
        },
        crossed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(tau: f64, sigma2: f64) -> EffectEstimate {
        EffectEstimate {
            tau_hat: tau,
            sigma2_hat: sigma2,
        }
    }

    #[test]
    fn frequentist_standard_quantile() {
        let b = frequentist_bounds(&est(0.0, 1.0), 0.05).unwrap();
        assert!((b.lower - -1.960).abs() < 1e-3, "{}", b.lower);
        assert!((b.upper - 1.960).abs() < 1e-3);
    }

    #[test]
    fn frequentist_reported_scale() {
        // tau=-0.0667, sigma=0.0348 -> roughly (-0.135, 0.001)
        let b = frequentist_bounds(&est(-0.0667, 0.0348f64.powi(2)), 0.05).unwrap();
        assert!((b.lower - -0.135).abs() < 1e-3, "{}", b.lower);
        assert!((b.upper - 0.001).abs() < 1e-3, "{}", b.upper);
    }

    #[test]
    fn frequentist_degenerate_variance() {
        let b = frequentist_bounds(&est(0.2, 0.0), 0.05).unwrap();
        assert_eq!((b.lower, b.upper), (0.2, 0.2));
    }

    #[test]
    fn manski_symmetric_case() {
        let b = manski_bounds(0.5, 0.5, 0.5).unwrap();
        assert!((b.lower - -0.5).abs() < 1e-12);
        assert!((b.upper - 0.5).abs() < 1e-12);
    }

    #[test]
    fn manski_hand_evaluated() {
        // mu1=0.96, mu0=0.98, p1=0.60:
        //   E[Y(1)] in [0.576, 0.976], E[Y(0)] in [0.392, 0.992]
        //   tau in [0.576 - 0.992, 0.976 - 0.392] = [-0.416, 0.584]
        let b = manski_bounds(0.96, 0.98, 0.60).unwrap();
        assert!((b.lower - -0.416).abs() < 1e-12);
        assert!((b.upper - 0.584).abs() < 1e-12);
    }

    #[test]
    fn manski_unit_width() {
        for &(mu1, mu0, p1) in &[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.3, 0.9, 0.42)] {
            let b = manski_bounds(mu1, mu0, p1).unwrap();
            assert!((b.width() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pearl_perfect_compliance_point_identifies() {
        // W = Z and Y = W: p111 = 1 given Z=1, p000 = 1 given Z=0.
        let jp = JointProbs::from_fn(|y, w, z| {
            let expect = if z == 1 { (1, 1) } else { (0, 0) };
            if (y, w) == expect {
                1.0
            } else {
                0.0
            }
        });
        let b = pearl_bounds(&jp).unwrap();
        assert!(!b.crossed);
        assert!(b.pair.contains(1.0), "{:?}", b);
        assert!((b.pair.lower - 1.0).abs() < 1e-12 && (b.pair.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_arms_cross_and_collapse_to_midpoint() {
        // everyone treated; outcome flips with the instrument, which no
        // response-type distribution can produce
        let jp = JointProbs::from_fn(|y, w, z| if w == 1 && y == z { 1.0 } else { 0.0 });
        let b = pearl_bounds(&jp).unwrap();
        assert!(b.crossed);
        assert_eq!(b.pair.lower, b.pair.upper);
    }

    #[test]
    fn pearl_uniform_contains_zero_with_unit_width() {
        let jp = JointProbs::from_fn(|_, _, _| 0.25);
        let b = pearl_bounds(&jp).unwrap();
        assert!(b.pair.contains(0.0));
        assert!((b.pair.lower - -0.5).abs() < 1e-12);
        assert!((b.pair.upper - 0.5).abs() < 1e-12);
    }
}
