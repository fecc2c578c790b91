//! Cross-fitted nuisance estimates: conditional outcome mean, instrument
//! probability, treatment propensity and the compliance score. Each case's
//! values come from learners trained on the other folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::data::Matrix;
use crate::forest::regression::{RegressionForest, RegressionParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceEstimates {
    /// m_hat = E[Y | X]
    pub m_hat: Vec<f64>,
    /// e_hat = E[Z | X]
    pub e_hat: Vec<f64>,
    /// p_hat = E[W | X] (propensity)
    pub p_hat: Vec<f64>,
    /// tauW_hat = E[W | Z=1, X] - E[W | Z=0, X] (compliance score)
    pub tauw_hat: Vec<f64>,
}

pub fn fit_nuisance(
    x: &Matrix,
    y: &[u8],
    w: &[u8],
    z: &[u8],
    folds: usize,
    params: &RegressionParams,
    seed: u64,
) -> Result<NuisanceEstimates> {
    let n = x.n_rows();
    if folds < 2 {
        return Err(Error::Config(format!("cross-fitting needs folds >= 2, got {folds}")));
    }
    if n < folds {
        return Err(Error::Data(format!("{n} cases cannot fill {folds} folds")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };

    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();

    let mut m_hat = vec![0.0; n];
    let mut e_hat = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut tauw_hat = vec![0.0; n];

    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let hold_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();

        let z1: Vec<usize> = train_idx.iter().copied().filter(|&i| z[i] == 1).collect();
        let z0: Vec<usize> = train_idx.iter().copied().filter(|&i| z[i] == 0).collect();
        if z1.is_empty() || z0.is_empty() {
            return Err(Error::Data(format!(
                "fold {fold}: all training instrument values equal; more data (or fewer folds) needed"
            )));
        }

        let sub_matrix = |idx: &[usize]| {
            Matrix::from_rows(idx.iter().map(|&i| x.row(i).to_vec()).collect()).expect("rows")
        };
        let sub_target = |idx: &[usize], t: &[f64]| idx.iter().map(|&i| t[i]).collect::<Vec<f64>>();

        let xt = sub_matrix(&train_idx);
        let m_forest = RegressionForest::fit(&xt, &sub_target(&train_idx, &yf), params, seed ^ fold_hash(fold, 1));
        let e_forest = RegressionForest::fit(&xt, &sub_target(&train_idx, &zf), params, seed ^ fold_hash(fold, 2));
        let p_forest = RegressionForest::fit(&xt, &sub_target(&train_idx, &wf), params, seed ^ fold_hash(fold, 3));
        let x1 = sub_matrix(&z1);
        let x0 = sub_matrix(&z0);
        let w1_forest = RegressionForest::fit(&x1, &sub_target(&z1, &wf), params, seed ^ fold_hash(fold, 4));
        let w0_forest = RegressionForest::fit(&x0, &sub_target(&z0, &wf), params, seed ^ fold_hash(fold, 5));

        for &i in &hold_idx {
            let row = x.row(i);
            m_hat[i] = m_forest.predict(row).clamp(0.0, 1.0);
            e_hat[i] = e_forest.predict(row).clamp(0.0, 1.0);
            p_hat[i] = p_forest.predict(row).clamp(0.0, 1.0);
            tauw_hat[i] =
                (w1_forest.predict(row) - w0_forest.predict(row)).clamp(-1.0, 1.0);
        }
    }

    Ok(NuisanceEstimates {
        m_hat,
        e_hat,
        p_hat,
        tauw_hat,
    })
}

fn fold_hash(fold: usize, which: u64) -> u64 {
    (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ which.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Nuisance values for one query point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NuisanceValues {
    pub m_hat: f64,
    pub e_hat: f64,
    pub p_hat: f64,
    pub tauw_hat: f64,
}

/// Full-training-data nuisance models retained for out-of-sample prediction
/// (diagnostics on held-out cases). Cross-fitted values stay the source for
/// orthogonalization within the training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisancePredictor {
    m: RegressionForest,
    e: RegressionForest,
    p: RegressionForest,
    w_z1: RegressionForest,
    w_z0: RegressionForest,
}

impl NuisancePredictor {
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        w: &[u8],
        z: &[u8],
        params: &RegressionParams,
        seed: u64,
    ) -> Result<NuisancePredictor> {
        let n = x.n_rows();
        let z1: Vec<usize> = (0..n).filter(|&i| z[i] == 1).collect();
        let z0: Vec<usize> = (0..n).filter(|&i| z[i] == 0).collect();
        if z1.is_empty() || z0.is_empty() {
            return Err(Error::Data(
                "all instrument values equal; cannot fit compliance models".into(),
            ));
        }
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let sub_matrix = |idx: &[usize]| {
            Matrix::from_rows(idx.iter().map(|&i| x.row(i).to_vec()).collect()).expect("rows")
        };
        let sub_target = |idx: &[usize], t: &[f64]| idx.iter().map(|&i| t[i]).collect::<Vec<f64>>();
        Ok(NuisancePredictor {
            m: RegressionForest::fit(x, &yf, params, seed ^ 0x11),
            e: RegressionForest::fit(x, &zf, params, seed ^ 0x22),
            p: RegressionForest::fit(x, &wf, params, seed ^ 0x33),
            w_z1: RegressionForest::fit(&sub_matrix(&z1), &sub_target(&z1, &wf), params, seed ^ 0x44),
            w_z0: RegressionForest::fit(&sub_matrix(&z0), &sub_target(&z0, &wf), params, seed ^ 0x55),
        })
    }

    pub fn predict(&self, x: &[f64]) -> NuisanceValues {
        NuisanceValues {
            m_hat: self.m.predict(x).clamp(0.0, 1.0),
            e_hat: self.e.predict(x).clamp(0.0, 1.0),
            p_hat: self.p.predict(x).clamp(0.0, 1.0),
            tauw_hat: (self.w_z1.predict(x) - self.w_z0.predict(x)).clamp(-1.0, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Matrix {
        Matrix::from_rows((0..n).map(|i| vec![(i % 2) as f64, (i % 5) as f64]).collect()).unwrap()
    }

    #[test]
    fn constant_outcome_is_recovered() {
        let n = 200;
        let x = grid(n);
        let y = vec![1u8; n];
        let w: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let z: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
        let nu = fit_nuisance(&x, &y, &w, &z, 5, &RegressionParams::default(), 3).unwrap();
        assert!(nu.m_hat.iter().all(|&m| (m - 1.0).abs() < 1e-9));
    }

    #[test]
    fn perfect_compliance_scores_near_one() {
        let n = 400;
        let x = grid(n);
        let z: Vec<u8> = (0..n).map(|i| ((i * 7 + 3) % 2) as u8).collect();
        let w = z.clone();
        let y: Vec<u8> = (0..n).map(|i| ((i * 11) % 2) as u8).collect();
        let nu = fit_nuisance(&x, &y, &w, &z, 5, &RegressionParams::default(), 4).unwrap();
        let mean: f64 = nu.tauw_hat.iter().sum::<f64>() / n as f64;
        assert!(mean > 0.9, "mean compliance {mean}");
    }

    #[test]
    fn single_arm_fold_errors() {
        let n = 60;
        let x = grid(n);
        let y = vec![1u8; n];
        let w = vec![0u8; n];
        let z = vec![1u8; n]; // no Z=0 anywhere
        let err = fit_nuisance(&x, &y, &w, &z, 3, &RegressionParams::default(), 5).unwrap_err();
        assert!(err.to_string().contains("instrument"), "{err}");
    }

    #[test]
    fn folds_below_two_rejected() {
        let x = grid(10);
        let err = fit_nuisance(&x, &[1; 10], &[0; 10], &[1; 10], 1, &RegressionParams::default(), 0)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
