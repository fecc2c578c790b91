//! Plain regression forest used for nuisance functions. Variance-reduction
//! CART splitting, subsampling without replacement, no honesty (the IV
//! forest's honesty applies to effect estimation, not nuisances).

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::forest::data::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub subsample_fraction: f64,
    /// Features tried per split; defaults to ceil(sqrt(p)).
    pub mtry: Option<usize>,
}

impl Default for RegressionParams {
    fn default() -> Self {
        RegressionParams {
            n_trees: 100,
            min_leaf: 25,
            subsample_fraction: 0.5,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
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

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionForest {
    trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    min_leaf: usize,
    mtry: usize,
}

impl<'a> Builder<'a> {
    fn grow(&self, indices: &mut [usize], rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.grow_node(indices, rng, &mut nodes);
        Tree { nodes }
    }

    fn grow_node(&self, indices: &mut [usize], rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let n = indices.len();
        let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;
        if n < 2 * self.min_leaf {
            nodes.push(Node::Leaf { value: mean });
            return nodes.len() - 1;
        }
        let Some((feature, threshold)) = self.best_split(indices, rng) else {
            nodes.push(Node::Leaf { value: mean });
            return nodes.len() - 1;
        };
        let mid = partition(indices, |i| self.x.get(i, feature) <= threshold);
        let id = nodes.len();
        nodes.push(Node::Leaf { value: mean }); // placeholder
        let (left_ids, right_ids) = indices.split_at_mut(mid);
        let left = self.grow_node(left_ids, rng, nodes);
        let right = self.grow_node(right_ids, rng, nodes);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best (feature, threshold) by variance reduction: maximize
    /// n_L*mean_L^2 + n_R*mean_R^2. Ties break to the lowest feature index,
    /// then the smallest threshold.
    fn best_split(&self, indices: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let p = self.x.n_cols();
        let mut features: Vec<usize> = (0..p).collect();
        features.shuffle(rng);
        features.truncate(self.mtry.min(p));
        features.sort_unstable();

        let n = indices.len();
        let total: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &feature in &features {
            sorted.clear();
            sorted.extend(indices.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += sorted[k].1;
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let n_l = k + 1;
                let n_r = n - n_l;
                if n_l < self.min_leaf || n_r < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_l as f64 + right_sum * right_sum / n_r as f64;
                let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                let better = match &best {
                    None => true,
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

fn partition(indices: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..indices.len() {
        if pred(indices[i]) {
            indices.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

impl RegressionForest {
    pub fn fit(x: &Matrix, y: &[f64], params: &RegressionParams, seed: u64) -> Self {
        assert_eq!(x.n_rows(), y.len());
        let n = x.n_rows();
        let mtry = params
            .mtry
            .unwrap_or_else(|| (x.n_cols() as f64).sqrt().ceil() as usize)
            .max(1);
        let sub = ((params.subsample_fraction * n as f64).round() as usize).clamp(1, n);
        let builder = Builder {
            x,
            y,
            min_leaf: params.min_leaf.max(1),
            mtry,
        };
        let seeds: Vec<u64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..params.n_trees).map(|_| rng.gen()).collect()
        };
        let trees: Vec<Tree> = seeds
            .par_iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut pool: Vec<usize> = (0..n).collect();
                pool.shuffle(&mut rng);
                pool.truncate(sub);
                builder.grow(&mut pool, &mut rng)
            })
            .collect();
        RegressionForest { trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_step_function() {
        let n = 400;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 2) as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let f = RegressionForest::fit(&x, &y, &RegressionParams::default(), 1);
        assert!(f.predict(&[1.0, 3.0]) > 0.9);
        assert!(f.predict(&[0.0, 3.0]) < 0.1);
    }

    #[test]
    fn constant_target_is_exact() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let y = vec![1.0; 50];
        let x = Matrix::from_rows(rows).unwrap();
        let f = RegressionForest::fit(&x, &y, &RegressionParams::default(), 2);
        assert!((f.predict(&[25.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_under_seed() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64).sin(), i as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| ((i * 13) % 5) as f64).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let a = RegressionForest::fit(&x, &y, &RegressionParams::default(), 9);
        let b = RegressionForest::fit(&x, &y, &RegressionParams::default(), 9);
        for i in 0..20 {
            let q = [(i as f64).sin(), i as f64];
            assert_eq!(a.predict(&q), b.predict(&q));
        }
    }
}
