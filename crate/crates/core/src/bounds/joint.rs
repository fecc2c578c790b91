//! Per-arm joint probabilities `p[y][w][z]` = P(Y=y, W=w | Z=z), either
//! estimated from forest-weighted neighborhoods or supplied directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ARM_SUM_TOL: f64 = 1e-6;

/// Eight conditional cell probabilities, indexed p\[y\]\[w\]\[z\].
/// Each instrument arm forms a simplex over the four (y, w) cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbs {
    pub p: [[[f64; 2]; 2]; 2],
}

impl JointProbs {
    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut p = [[[0.0; 2]; 2]; 2];
        for y in 0..2 {
            for w in 0..2 {
                for z in 0..2 {
                    p[y][w][z] = f(y, w, z);
                }
            }
        }
        JointProbs { p }
    }

    pub fn get(&self, y: usize, w: usize, z: usize) -> f64 {
        self.p[y][w][z]
    }

    /// Cells in the fixed order p000, p001, p010, p011, p100, p101, p110,
    /// p111 (subscripts y, w, z), matching the bound term tables.
    pub fn cell_array(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        let mut i = 0;
        for y in 0..2 {
            for w in 0..2 {
                for z in 0..2 {
                    out[i] = self.p[y][w][z];
                    i += 1;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for z in 0..2 {
            let mut sum = 0.0;
            for y in 0..2 {
                for w in 0..2 {
                    let v = self.p[y][w][z];
                    if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                        return Err(Error::Numeric(format!(
                            "joint probability p[{y}][{w}][{z}]={v} outside [0,1]"
                        )));
                    }
                    sum += v;
                }
            }
            if (sum - 1.0).abs() > ARM_SUM_TOL {
                return Err(Error::Numeric(format!(
                    "arm z={z} cell probabilities sum to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Weighted empirical conditionals: within each instrument arm, cells are
    /// weighted counts renormalized by the arm's total weight. An arm with
    /// total weight below `min_arm_weight` is a degenerate neighborhood.
    pub fn from_weighted_cases(
        weights: &[f64],
        y: &[u8],
        w: &[u8],
        z: &[u8],
        min_arm_weight: f64,
    ) -> Result<Self> {
        let mut cell = [[[0.0; 2]; 2]; 2];
        let mut arm = [0.0; 2];
        for i in 0..weights.len() {
            let wi = weights[i];
            if wi == 0.0 {
                continue;
            }
            let zi = z[i] as usize;
            cell[y[i] as usize][w[i] as usize][zi] += wi;
            arm[zi] += wi;
        }
        for (zi, total) in arm.iter().enumerate() {
            if *total < min_arm_weight {
                return Err(Error::Numeric(format!(
                    "degenerate neighborhood: instrument arm z={zi} has total weight {total}"
                )));
            }
        }
        Ok(JointProbs::from_fn(|y, w, z| cell[y][w][z] / arm[z]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_example() {
        // 4 equal-weight cases, one per (y,w) combination, all Z=1, plus a
        // mirrored Z=0 set -> each cell 0.25 per arm.
        let weights = vec![1.0; 8];
        let y = vec![0, 0, 1, 1, 0, 0, 1, 1];
        let w = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let z = vec![1, 1, 1, 1, 0, 0, 0, 0];
        let jp = JointProbs::from_weighted_cases(&weights, &y, &w, &z, 1e-6).unwrap();
        for arm in 0..2 {
            for yy in 0..2 {
                for ww in 0..2 {
                    assert!((jp.get(yy, ww, arm) - 0.25).abs() < 1e-12);
                }
            }
        }
        jp.validate().unwrap();
    }

    #[test]
    fn single_case_makes_other_arm_degenerate() {
        let weights = vec![1.0];
        let err =
            JointProbs::from_weighted_cases(&weights, &[1], &[1], &[1], 1e-6).unwrap_err();
        assert!(err.to_string().contains("degenerate neighborhood"));
    }

    #[test]
    fn arm_sums_validate() {
        let mut jp = JointProbs::from_fn(|_, _, _| 0.25);
        jp.validate().unwrap();
        jp.p[0][0][0] = 0.5;
        assert!(jp.validate().is_err());
    }
}
