//! The honest IV causal forest: subsampled tree growing, adaptive
//! neighborhood weights, orthogonalized IATE prediction and a delta-method
//! plug-in variance for the local moment ratio.
//!
//! Prediction solves the local orthogonalized moment condition
//!   tau(x) = sum_i a(x,i) (Y_i - m_i)(Z_i - e_i)
//!          / sum_i a(x,i) (W_i - p_i)(Z_i - e_i),
//! which reduces to the leaf Wald ratio on a one-leaf forest with pooled
//! nuisances. The raw pseudo-outcome (Y - m)(Z - e) / tauW is kept per case
//! for diagnostics and exclusion accounting.

use rand::Rng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::data::Matrix;
use crate::forest::ivtree::{grow_tree, IvTree, IvTreeParams, TreeContext};
use crate::forest::nuisance::{fit_nuisance, NuisanceEstimates, NuisancePredictor};
use crate::forest::regression::RegressionParams;

pub const FOREST_FORMAT_VERSION: &str = "ivforest.v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvForestParams {
    /// Number of trees (B).
    pub n_trees: usize,
    /// Subsample share of the training set per tree.
    pub subsample_fraction: f64,
    /// Share of each subsample reserved for estimation (I).
    pub honesty_fraction: f64,
    /// Minimum observations per instrument arm in splits and valid leaves.
    pub min_leaf: usize,
    /// Features tried per split; None = ceil(sqrt(p)).
    pub mtry: Option<usize>,
    /// Floor for |tauW_hat| and leaf treatment gaps.
    pub denom_floor: f64,
    /// Cross-fitting folds for nuisances.
    pub folds: usize,
    /// Trees per nuisance regression forest.
    pub nuisance_trees: usize,
    pub seed: u64,
}

impl Default for IvForestParams {
    fn default() -> Self {
        IvForestParams {
            n_trees: 2000,
            subsample_fraction: 0.5,
            honesty_fraction: 0.5,
            min_leaf: 5,
            mtry: None,
            denom_floor: 1e-3,
            folds: 5,
            nuisance_trees: 100,
            seed: 42,
        }
    }
}

/// Per-patient effect estimate; bound slots are attached by the bounds
/// module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub tau_hat: f64,
    pub sigma2_hat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvForest {
    pub version: String,
    pub schema_hash: String,
    pub params: IvForestParams,
    pub trees: Vec<IvTree>,
    pub nuisances: NuisanceEstimates,
    /// Full-data nuisance models for out-of-sample diagnostics.
    pub nuisance_predictor: NuisancePredictor,
    pub y: Vec<u8>,
    pub w: Vec<u8>,
    pub z: Vec<u8>,
    /// Literal orthogonalized pseudo-outcomes (diagnostics; None when excluded).
    pub pseudo: Vec<Option<f64>>,
    /// |tauW_hat| below the floor: excluded from aggregation.
    pub excluded: Vec<bool>,
    pub n_excluded: usize,
    /// (Y - m)(Z - e) and (W - p)(Z - e) per training case.
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub n_train: usize,
}

/// Literal orthogonalized pseudo-outcome (Y - m)(Z - e) / tauW. Cases whose
/// compliance score sits below `denom_floor` are excluded with a counter
/// rather than blowing up.
pub fn pseudo_outcome(
    y: u8,
    z: u8,
    m_hat: f64,
    e_hat: f64,
    tauw_hat: f64,
    denom_floor: f64,
) -> Option<f64> {
    if tauw_hat.abs() < denom_floor {
        return None;
    }
    Some((y as f64 - m_hat) * (z as f64 - e_hat) / tauw_hat)
}

impl IvForest {
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        w: &[u8],
        z: &[u8],
        params: IvForestParams,
        schema_hash: String,
    ) -> Result<IvForest> {
        let n = x.n_rows();
        if n == 0 {
            return Err(Error::Data("cannot fit a forest on zero cases".into()));
        }
        if params.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        // probability targets want smoother leaves than effect splitting
        let nuisance_params = RegressionParams {
            n_trees: params.nuisance_trees,
            min_leaf: 25,
            subsample_fraction: 0.5,
            mtry: None,
        };
        let nuisances = fit_nuisance(x, y, w, z, params.folds, &nuisance_params, params.seed ^ 0xA5)?;
        let nuisance_predictor =
            NuisancePredictor::fit(x, y, w, z, &nuisance_params, params.seed ^ 0x5A)?;

        let mut pseudo: Vec<Option<f64>> = vec![None; n];
        let mut excluded = vec![false; n];
        let mut n_excluded = 0;
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for i in 0..n {
            num[i] = (y[i] as f64 - nuisances.m_hat[i]) * (z[i] as f64 - nuisances.e_hat[i]);
            den[i] = (w[i] as f64 - nuisances.p_hat[i]) * (z[i] as f64 - nuisances.e_hat[i]);
            match pseudo_outcome(
                y[i],
                z[i],
                nuisances.m_hat[i],
                nuisances.e_hat[i],
                nuisances.tauw_hat[i],
                params.denom_floor,
            ) {
                Some(p) => pseudo[i] = Some(p),
                None => {
                    excluded[i] = true;
                    n_excluded += 1;
                }
            }
        }

        let ctx = TreeContext {
            x,
            y,
            w,
            z,
            nuisances: &nuisances,
            num: &num,
            den: &den,
            excluded: &excluded,
        };
        let tree_params = IvTreeParams {
            min_leaf: params.min_leaf,
            mtry: params
                .mtry
                .unwrap_or_else(|| (x.n_cols() as f64).sqrt().ceil() as usize)
                .max(1),
            denom_floor: params.denom_floor,
            honesty_fraction: params.honesty_fraction,
        };

        let tree_seeds: Vec<u64> = {
            let mut master = ChaCha8Rng::seed_from_u64(params.seed);
            (0..params.n_trees).map(|_| master.gen()).collect()
        };
        let take = ((params.subsample_fraction * n as f64).round() as usize).clamp(2, n.max(2)).min(n);
        let trees: Vec<IvTree> = tree_seeds
            .par_iter()
            .map(|&tree_seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let mut chosen: Vec<u32> = (0..n as u32).collect();
                chosen.shuffle(&mut rng);
                chosen.truncate(take);
                chosen.sort_unstable();
                grow_tree(&ctx, &chosen, &tree_params, &mut rng)
            })
            .collect();

        Ok(IvForest {
            version: FOREST_FORMAT_VERSION.to_string(),
            schema_hash,
            params,
            trees,
            nuisances,
            nuisance_predictor,
            y: y.to_vec(),
            w: w.to_vec(),
            z: z.to_vec(),
            pseudo,
            excluded,
            n_excluded,
            num,
            den,
            n_train: n,
        })
    }

    /// Adaptive neighborhood weights over training cases: each valid leaf
    /// containing x spreads 1/(B * leaf size) over its estimation members;
    /// the vector is renormalized to sum to one.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let mut alpha = vec![0.0f64; self.n_train];
        let b = self.trees.len() as f64;
        for tree in &self.trees {
            let leaf = &tree.leaves[tree.leaf_for(x)];
            if !leaf.valid || leaf.members.is_empty() {
                continue;
            }
            let share = 1.0 / (b * leaf.members.len() as f64);
            for &i in &leaf.members {
                alpha[i as usize] += share;
            }
        }
        let total: f64 = alpha.iter().sum();
        if total > 0.0 {
            for a in alpha.iter_mut() {
                *a /= total;
            }
        }
        alpha
    }

    /// IATE prediction with a delta-method plug-in variance: with
    /// N = sum a_i num_i and D = sum a_i den_i over included cases,
    /// tau = N/D and sigma2 = sum a_i^2 (num_i - tau den_i)^2 / D^2.
    pub fn predict(&self, x: &[f64]) -> Result<EffectEstimate> {
        let alpha = self.weights(x);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut included_weight = 0.0;
        for i in 0..self.n_train {
            if alpha[i] == 0.0 || self.excluded[i] {
                continue;
            }
            included_weight += alpha[i];
            num += alpha[i] * self.num[i];
            den += alpha[i] * self.den[i];
        }
        if included_weight < 1e-9 {
            return Err(Error::Numeric("no valid neighborhood".into()));
        }
        if den.abs() < 1e-12 {
            return Err(Error::Numeric(
                "locally degenerate first stage (weighted compliance ~ 0)".into(),
            ));
        }
        let tau_hat = num / den;
        let mut ss = 0.0;
        for i in 0..self.n_train {
            if alpha[i] == 0.0 || self.excluded[i] {
                continue;
            }
            ss += alpha[i].powi(2) * (self.num[i] - tau_hat * self.den[i]).powi(2);
        }
        Ok(EffectEstimate {
            tau_hat,
            sigma2_hat: ss / (den * den),
        })
    }

    /// Serializes the forest (header, hyperparameters, schema hash, per-tree
    /// node arrays) as structured text.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Data(format!("forest serialization failed: {e}")))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<IvForest> {
        let file = std::fs::File::open(path)?;
        let forest: IvForest = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::Data(format!("forest deserialization failed: {e}")))?;
        if forest.version != FOREST_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "forest format {} unsupported (expected {})",
                forest.version, FOREST_FORMAT_VERSION
            )));
        }
        Ok(forest)
    }
}
