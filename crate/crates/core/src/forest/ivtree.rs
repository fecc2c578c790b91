//! Honest instrumental-variable trees. Each tree splits one half of its
//! subsample (J) to maximize heterogeneity of local IV effects and estimates
//! on the other half (I); no observation serves both roles within a tree.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forest::data::Matrix;
use crate::forest::nuisance::NuisanceEstimates;

/// Ratio of outcome to treatment mean differences across instrument arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeafSignal {
    Estimate(f64),
    /// Only one instrument arm present.
    OneArm,
    /// Treatment mean gap below the denominator floor.
    ZeroDenominator,
}

impl LeafSignal {
    pub fn value(self) -> Option<f64> {
        match self {
            LeafSignal::Estimate(v) => Some(v),
            _ => None,
        }
    }
}

/// (meanY|Z=1 - meanY|Z=0) / (meanW|Z=1 - meanW|Z=0) over a leaf's members.
pub fn leaf_iv_estimate(y: &[u8], w: &[u8], z: &[u8], denom_floor: f64) -> LeafSignal {
    let mut s = ArmStats::default();
    for i in 0..y.len() {
        s.add(y[i] as f64, w[i] as f64, z[i]);
    }
    s.estimate(denom_floor)
}

#[derive(Debug, Clone, Copy, Default)]
struct ArmStats {
    n1: u32,
    n0: u32,
    sum_y1: f64,
    sum_y0: f64,
    sum_w1: f64,
    sum_w0: f64,
}

impl ArmStats {
    fn add(&mut self, y: f64, w: f64, z: u8) {
        if z == 1 {
            self.n1 += 1;
            self.sum_y1 += y;
            self.sum_w1 += w;
        } else {
            self.n0 += 1;
            self.sum_y0 += y;
            self.sum_w0 += w;
        }
    }

    fn sub(&mut self, y: f64, w: f64, z: u8) {
        if z == 1 {
            self.n1 -= 1;
            self.sum_y1 -= y;
            self.sum_w1 -= w;
        } else {
            self.n0 -= 1;
            self.sum_y0 -= y;
            self.sum_w0 -= w;
        }
    }

    fn n(&self) -> u32 {
        self.n1 + self.n0
    }

    fn w_gap(&self) -> Option<f64> {
        if self.n1 == 0 || self.n0 == 0 {
            return None;
        }
        Some(self.sum_w1 / self.n1 as f64 - self.sum_w0 / self.n0 as f64)
    }

    fn estimate(&self, denom_floor: f64) -> LeafSignal {
        if self.n1 == 0 || self.n0 == 0 {
            return LeafSignal::OneArm;
        }
        let denom = self.w_gap().expect("both arms present");
        if denom.abs() < denom_floor {
            return LeafSignal::ZeroDenominator;
        }
        let num = self.sum_y1 / self.n1 as f64 - self.sum_y0 / self.n0 as f64;
        LeafSignal::Estimate(num / denom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum IvNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvLeaf {
    /// Estimation-sample (I) training indices routed into this leaf.
    pub members: Vec<u32>,
    /// Leaf IV estimate on I.
    pub signal: LeafSignal,
    /// Usable for estimation: at least `min_leaf` I-members per instrument
    /// arm and a treatment gap above the floor.
    pub valid: bool,
    /// Orthogonalized moment sums over included I-members, for per-tree
    /// predictions: sum (Y-m)(Z-e) and sum (W-p)(Z-e).
    pub num_sum: f64,
    pub den_sum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvTree {
    pub nodes: Vec<IvNode>,
    pub leaves: Vec<IvLeaf>,
    /// J: indices used for split placement.
    pub split_sample: Vec<u32>,
    /// I: indices used for estimation.
    pub est_sample: Vec<u32>,
}

impl IvTree {
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                IvNode::Leaf { leaf } => return *leaf,
                IvNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IvTreeParams {
    pub min_leaf: usize,
    pub mtry: usize,
    pub denom_floor: f64,
    pub honesty_fraction: f64,
}

/// Everything a tree needs from the training set.
pub struct TreeContext<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
    pub w: &'a [u8],
    pub z: &'a [u8],
    pub nuisances: &'a NuisanceEstimates,
    /// (Y - m)(Z - e) per case.
    pub num: &'a [f64],
    /// (W - p)(Z - e) per case.
    pub den: &'a [f64],
    /// Cases with |tauW_hat| below the floor, excluded from aggregation.
    pub excluded: &'a [bool],
}

/// Grows one honest IV tree on `pool` (the tree's subsample). The pool is
/// shuffled and divided into J (splitting) and I (estimation) halves.
pub fn grow_tree(
    ctx: &TreeContext<'_>,
    pool: &[u32],
    params: &IvTreeParams,
    rng: &mut ChaCha8Rng,
) -> IvTree {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    let n_total = shuffled.len();
    let n_split = (((n_total as f64) * (1.0 - params.honesty_fraction)).round() as usize)
        .clamp(1, n_total.saturating_sub(1).max(1));
    let (split_sample, est_sample) = shuffled.split_at(n_split.min(n_total));
    let mut split_sample = split_sample.to_vec();
    let est_sample = est_sample.to_vec();

    let mut builder = TreeBuilder {
        ctx,
        params,
        nodes: Vec::new(),
        rng,
    };
    builder.grow_node(&mut split_sample);
    let mut tree = IvTree {
        nodes: builder.nodes,
        leaves: Vec::new(),
        split_sample,
        est_sample: est_sample.clone(),
    };
    attach_estimation_sample(ctx, params, &mut tree);
    tree
}

struct TreeBuilder<'a, 'b> {
    ctx: &'a TreeContext<'a>,
    params: &'a IvTreeParams,
    nodes: Vec<IvNode>,
    rng: &'b mut ChaCha8Rng,
}

impl TreeBuilder<'_, '_> {
    fn grow_node(&mut self, members: &mut [u32]) -> usize {
        if let Some((feature, threshold)) = self.best_split(members) {
            let id = self.nodes.len();
            self.nodes.push(IvNode::Leaf { leaf: usize::MAX }); // placeholder
            let mid = partition(members, |i| {
                self.ctx.x.get(i as usize, feature) <= threshold
            });
            let (left_m, right_m) = members.split_at_mut(mid);
            let left = self.grow_node(left_m);
            let right = self.grow_node(right_m);
            self.nodes[id] = IvNode::Split {
                feature,
                threshold,
                left,
                right,
            };
            id
        } else {
            let id = self.nodes.len();
            // leaf index assigned when the estimation sample is attached
            self.nodes.push(IvNode::Leaf { leaf: usize::MAX });
            id
        }
    }

    /// Splits are chosen on J to maximize
    /// sum_children n_child * (child estimate - parent estimate)^2. A
    /// candidate is admissible only if both children keep `min_leaf`
    /// observations of each instrument arm and a treatment gap above the
    /// floor. Ties break to the lowest feature index, then the smallest
    /// threshold.
    fn best_split(&mut self, members: &[u32]) -> Option<(usize, f64)> {
        let min_leaf = self.params.min_leaf as u32;
        let mut parent = ArmStats::default();
        for &i in members {
            let i = i as usize;
            parent.add(self.ctx.y[i] as f64, self.ctx.w[i] as f64, self.ctx.z[i]);
        }
        if parent.n1 < 2 * min_leaf || parent.n0 < 2 * min_leaf {
            return None;
        }
        let parent_est = parent.estimate(self.params.denom_floor).value().unwrap_or(0.0);

        let p = self.ctx.x.n_cols();
        let mut features: Vec<usize> = (0..p).collect();
        features.shuffle(self.rng);
        features.truncate(self.params.mtry.min(p));
        features.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<u32> = members.to_vec();
        for &feature in &features {
            sorted.sort_unstable_by(|&a, &b| {
                self.ctx
                    .x
                    .get(a as usize, feature)
                    .total_cmp(&self.ctx.x.get(b as usize, feature))
            });
            let mut left = ArmStats::default();
            let mut right = parent;
            for k in 0..sorted.len() - 1 {
                let i = sorted[k] as usize;
                left.add(self.ctx.y[i] as f64, self.ctx.w[i] as f64, self.ctx.z[i]);
                right.sub(self.ctx.y[i] as f64, self.ctx.w[i] as f64, self.ctx.z[i]);
                let v = self.ctx.x.get(i, feature);
                let v_next = self.ctx.x.get(sorted[k + 1] as usize, feature);
                if v == v_next {
                    continue;
                }
                if left.n1 < min_leaf
                    || left.n0 < min_leaf
                    || right.n1 < min_leaf
                    || right.n0 < min_leaf
                {
                    continue;
                }
                let (Some(le), Some(re)) = (
                    left.estimate(self.params.denom_floor).value(),
                    right.estimate(self.params.denom_floor).value(),
                ) else {
                    continue;
                };
                let score = left.n() as f64 * (le - parent_est).powi(2)
                    + right.n() as f64 * (re - parent_est).powi(2);
                let threshold = 0.5 * (v + v_next);
                let better = match &best {
                    None => score > 0.0,
                    Some((s, f, t)) => {
                        score > *s + 1e-12
                            || ((score - *s).abs() <= 1e-12
                                && (feature < *f || (feature == *f && threshold < *t)))
                    }
                };
                if better {
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn partition(indices: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..indices.len() {
        if pred(indices[i]) {
            indices.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

/// Routes I-members into the grown structure, then computes per-leaf
/// estimates, validity and orthogonalized moment sums.
fn attach_estimation_sample(ctx: &TreeContext<'_>, params: &IvTreeParams, tree: &mut IvTree) {
    // assign leaf ids in node order for determinism
    let mut leaf_ids = Vec::new();
    for node in tree.nodes.iter_mut() {
        if let IvNode::Leaf { leaf } = node {
            *leaf = leaf_ids.len();
            leaf_ids.push(());
        }
    }
    let mut leaves: Vec<IvLeaf> = (0..leaf_ids.len())
        .map(|_| IvLeaf {
            members: Vec::new(),
            signal: LeafSignal::OneArm,
            valid: false,
            num_sum: 0.0,
            den_sum: 0.0,
        })
        .collect();
    for &i in &tree.est_sample {
        let leaf = tree.leaf_for(ctx.x.row(i as usize));
        leaves[leaf].members.push(i);
    }
    for leaf in leaves.iter_mut() {
        let mut stats = ArmStats::default();
        let mut num_sum = 0.0;
        let mut den_sum = 0.0;
        let mut arm1 = 0u32;
        let mut arm0 = 0u32;
        for &i in &leaf.members {
            let i = i as usize;
            stats.add(ctx.y[i] as f64, ctx.w[i] as f64, ctx.z[i]);
            if ctx.z[i] == 1 {
                arm1 += 1;
            } else {
                arm0 += 1;
            }
            if !ctx.excluded[i] {
                num_sum += ctx.num[i];
                den_sum += ctx.den[i];
            }
        }
        leaf.signal = stats.estimate(params.denom_floor);
        leaf.num_sum = num_sum;
        leaf.den_sum = den_sum;
        leaf.valid = arm1 >= params.min_leaf as u32
            && arm0 >= params.min_leaf as u32
            && matches!(leaf.signal, LeafSignal::Estimate(_));
    }
    tree.leaves = leaves;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn leaf_ratio_direct() {
        // Y means (0.8, 0.6), W means (0.7, 0.2) -> 0.2 / 0.5 = 0.4
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut z = Vec::new();
        for i in 0..10 {
            z.push(1);
            y.push(u8::from(i < 8));
            w.push(u8::from(i < 7));
        }
        for i in 0..10 {
            z.push(0);
            y.push(u8::from(i < 6));
            w.push(u8::from(i < 2));
        }
        match leaf_iv_estimate(&y, &w, &z, 1e-3) {
            LeafSignal::Estimate(v) => assert!((v - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_numerator_and_zero_denominator() {
        // identical Y rates across arms, W means (1, 0) -> estimate 0
        let y = vec![1, 0, 1, 0];
        let w = vec![1, 1, 0, 0];
        let z = vec![1, 1, 0, 0];
        assert_eq!(leaf_iv_estimate(&y, &w, &z, 1e-3), LeafSignal::Estimate(0.0));
        // equal W means across arms -> invalid
        let w_flat = vec![1, 0, 1, 0];
        assert_eq!(
            leaf_iv_estimate(&y, &w_flat, &z, 1e-3),
            LeafSignal::ZeroDenominator
        );
    }

    #[test]
    fn one_arm_leaf_is_invalid() {
        assert_eq!(leaf_iv_estimate(&[1, 0], &[1, 0], &[1, 1], 1e-3), LeafSignal::OneArm);
    }

    fn toy_context<'a>(
        x: &'a Matrix,
        y: &'a [u8],
        w: &'a [u8],
        z: &'a [u8],
        nu: &'a NuisanceEstimates,
        num: &'a [f64],
        den: &'a [f64],
        excluded: &'a [bool],
    ) -> TreeContext<'a> {
        TreeContext {
            x,
            y,
            w,
            z,
            nuisances: nu,
            num,
            den,
            excluded,
        }
    }

    /// Perfect compliance, no noise, tau = 0 vs 0.5 separated by covariate 0.
    fn separable_data(n: usize) -> (Matrix, Vec<u8>, Vec<u8>, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut z = Vec::new();
        for i in 0..n {
            let group = (i % 2) as f64; // covariate 0 separates effects
            let zi = ((i / 2) % 2) as u8;
            let wi = zi; // perfect compliance
            // group 0: tau=0 (y always 0); group 1: tau=0.5 (y=1 for half the treated)
            let yi = if group > 0.5 && wi == 1 {
                u8::from(i % 4 == 1 || i % 8 < 4)
            } else {
                0
            };
            rows.push(vec![group, (i % 7) as f64]);
            y.push(yi);
            w.push(wi);
            z.push(zi);
        }
        (Matrix::from_rows(rows).unwrap(), y, w, z)
    }

    #[test]
    fn root_split_lands_on_separating_covariate() {
        let n = 240;
        let (x, y, w, z) = separable_data(n);
        let nu = NuisanceEstimates {
            m_hat: vec![0.5; n],
            e_hat: vec![0.5; n],
            p_hat: vec![0.5; n],
            tauw_hat: vec![1.0; n],
        };
        let num: Vec<f64> = (0..n)
            .map(|i| (y[i] as f64 - nu.m_hat[i]) * (z[i] as f64 - nu.e_hat[i]))
            .collect();
        let den: Vec<f64> = (0..n)
            .map(|i| (w[i] as f64 - nu.p_hat[i]) * (z[i] as f64 - nu.e_hat[i]))
            .collect();
        let excluded = vec![false; n];
        let ctx = toy_context(&x, &y, &w, &z, &nu, &num, &den, &excluded);
        let pool: Vec<u32> = (0..n as u32).collect();
        let params = IvTreeParams {
            min_leaf: 5,
            mtry: 2,
            denom_floor: 1e-3,
            honesty_fraction: 0.5,
        };
        // brute-force over the 1-feature split set confirms feature 0 is the
        // only split separating the two effect groups; the tree must find it.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tree = grow_tree(&ctx, &pool, &params, &mut rng);
        match &tree.nodes[0] {
            IvNode::Split { feature, .. } => assert_eq!(*feature, 0),
            IvNode::Leaf { .. } => panic!("expected a root split"),
        }
        // honesty: no index in both samples
        for i in &tree.split_sample {
            assert!(!tree.est_sample.contains(i));
        }
    }

    #[test]
    fn constant_covariates_give_single_leaf() {
        let n = 80;
        let x = Matrix::from_rows(vec![vec![1.0, 2.0]; n]).unwrap();
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let z: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
        let w = z.clone();
        let nu = NuisanceEstimates {
            m_hat: vec![0.5; n],
            e_hat: vec![0.5; n],
            p_hat: vec![0.5; n],
            tauw_hat: vec![1.0; n],
        };
        let num = vec![0.0; n];
        let den = vec![0.25; n];
        let excluded = vec![false; n];
        let ctx = toy_context(&x, &y, &w, &z, &nu, &num, &den, &excluded);
        let pool: Vec<u32> = (0..n as u32).collect();
        let params = IvTreeParams {
            min_leaf: 5,
            mtry: 2,
            denom_floor: 1e-3,
            honesty_fraction: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = grow_tree(&ctx, &pool, &params, &mut rng);
        assert_eq!(tree.leaves.len(), 1);

        // min_leaf >= subsample size also forces a single leaf
        let params_big = IvTreeParams {
            min_leaf: n,
            ..params
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tree = grow_tree(&ctx, &pool, &params_big, &mut rng);
        assert_eq!(tree.leaves.len(), 1);
    }
}
