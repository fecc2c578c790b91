//! Reference bounds by direct optimization over response-type distributions.
//!
//! A response type pairs a compliance behaviour (never-taker, complier,
//! always-taker, defier) with a potential-outcome pair (Y(0), Y(1)). The 16
//! type probabilities must reproduce the observed per-arm cell probabilities;
//! the treatment effect E[Y(1) - Y(0)] is then minimized/maximized over that
//! polytope by enumerating basic feasible solutions. This route shares no
//! code with the closed-form term set in `pair.rs`.

use serde::{Deserialize, Serialize};

use crate::bounds::joint::JointProbs;
use crate::bounds::pair::{BoundMethod, BoundPair};
use crate::error::{Error, Result};

const N_TYPES: usize = 16;
const N_CELLS: usize = 8;
const FEAS_TOL: f64 = 1e-9;

/// (W when Z=0, W when Z=1) for the four compliance behaviours.
const COMPLIANCE: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBounds {
    pub pair: BoundPair,
    /// Set when the observed probabilities were not exactly reproducible and
    /// the nearest feasible blend toward the uniform distribution was used.
    pub projected: bool,
    /// Blend weight toward uniform when projected (0 = untouched input).
    pub projection_lambda: f64,
}

struct Model {
    /// a[cell][type] membership matrix.
    a: [[f64; N_TYPES]; N_CELLS],
    /// objective per type: y1 - y0.
    c: [f64; N_TYPES],
}

fn cell_index(y: usize, w: usize, z: usize) -> usize {
    y * 4 + w * 2 + z
}

fn model() -> Model {
    let mut a = [[0.0; N_TYPES]; N_CELLS];
    let mut c = [0.0; N_TYPES];
    let mut t = 0;
    for (w0, w1) in COMPLIANCE {
        for y0 in 0..2usize {
            for y1 in 0..2usize {
                for z in 0..2usize {
                    let w = if z == 1 { w1 } else { w0 } as usize;
                    let y = if w == 1 { y1 } else { y0 };
                    a[cell_index(y, w, z)][t] = 1.0;
                }
                c[t] = y1 as f64 - y0 as f64;
                t += 1;
            }
        }
    }
    Model { a, c }
}

/// Solves the 8 x k system A_B x = b by Gaussian elimination with partial
/// pivoting. Returns None when inconsistent or rank-deficient.
fn solve_basis(a: &[[f64; N_TYPES]; N_CELLS], basis: &[usize], b: &[f64; N_CELLS]) -> Option<Vec<f64>> {
    let k = basis.len();
    let mut m = [[0.0f64; 8]; N_CELLS]; // up to 7 columns + rhs
    for (r, row) in m.iter_mut().enumerate().take(N_CELLS) {
        for (j, &col) in basis.iter().enumerate() {
            row[j] = a[r][col];
        }
        row[k] = b[r];
    }
    let mut rank = 0;
    for col in 0..k {
        let mut piv = rank;
        let mut best = m[rank][col].abs();
        for r in rank + 1..N_CELLS {
            if m[r][col].abs() > best {
                best = m[r][col].abs();
                piv = r;
            }
        }
        if best < 1e-12 {
            return None; // rank deficient basis
        }
        m.swap(rank, piv);
        let f = m[rank][col];
        for j in col..=k {
            m[rank][j] /= f;
        }
        for r in 0..N_CELLS {
            if r != rank && m[r][col].abs() > 0.0 {
                let g = m[r][col];
                for j in col..=k {
                    m[r][j] -= g * m[rank][j];
                }
            }
        }
        rank += 1;
    }
    // consistency of the remaining rows
    for row in m.iter().skip(rank) {
        if row[k].abs() > FEAS_TOL {
            return None;
        }
    }
    Some((0..k).map(|j| m[j][k]).collect())
}

fn cell_vector(jp: &JointProbs) -> [f64; N_CELLS] {
    let mut b = [0.0; N_CELLS];
    for y in 0..2 {
        for w in 0..2 {
            for z in 0..2 {
                b[cell_index(y, w, z)] = jp.get(y, w, z);
            }
        }
    }
    b
}

/// Scans all 7-column bases; returns (min, max, any_feasible).
fn enumerate_extremes(b: &[f64; N_CELLS]) -> (f64, f64, bool) {
    let m = model();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut feasible = false;
    let mut basis = [0usize; 7];
    // iterate over C(16,7) subsets
    fn rec(
        start: usize,
        depth: usize,
        basis: &mut [usize; 7],
        m: &Model,
        b: &[f64; N_CELLS],
        lo: &mut f64,
        hi: &mut f64,
        feasible: &mut bool,
    ) {
        if depth == 7 {
            if let Some(x) = solve_basis(&m.a, basis, b) {
                if x.iter().all(|&v| v >= -FEAS_TOL) {
                    *feasible = true;
                    let obj: f64 = basis.iter().zip(&x).map(|(&t, &q)| m.c[t] * q).sum();
                    *lo = lo.min(obj);
                    *hi = hi.max(obj);
                }
            }
            return;
        }
        for t in start..N_TYPES {
            if N_TYPES - t < 7 - depth {
                break;
            }
            basis[depth] = t;
            rec(t + 1, depth + 1, basis, m, b, lo, hi, feasible);
        }
    }
    rec(0, 0, &mut basis, &m, b, &mut lo, &mut hi, &mut feasible);
    (lo, hi, feasible)
}

fn is_feasible_point(b: &[f64; N_CELLS]) -> bool {
    enumerate_extremes(b).2
}

/// Sharp treatment-effect bounds over the response-type polytope. Infeasible
/// inputs (possible with estimated probabilities) are blended toward the
/// per-arm uniform distribution just far enough to restore feasibility, and
/// the result is flagged.
pub fn lp_oracle_bounds(jp: &JointProbs) -> Result<OracleBounds> {
    jp.validate()?;
    let b_raw = cell_vector(jp);
    let uniform = [0.25; N_CELLS];

    let mut lambda = 0.0;
    let mut b = b_raw;
    if !is_feasible_point(&b) {
        // smallest blend toward uniform that is feasible (the feasible image
        // of the simplex is convex, so feasibility is monotone in lambda)
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let cand: Vec<f64> = b_raw
                .iter()
                .zip(&uniform)
                .map(|(p, u)| (1.0 - mid) * p + mid * u)
                .collect();
            let cand: [f64; N_CELLS] = cand.try_into().unwrap();
            if is_feasible_point(&cand) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lambda = (hi + 1e-9).min(1.0);
        for (i, v) in b.iter_mut().enumerate() {
            *v = (1.0 - lambda) * b_raw[i] + lambda * uniform[i];
        }
        if !is_feasible_point(&b) {
            return Err(Error::Numeric(
                "response-type polytope projection failed".into(),
            ));
        }
    }

    let (lo, hi, feasible) = enumerate_extremes(&b);
    if !feasible {
        return Err(Error::Numeric("response-type polytope empty".into()));
    }
    Ok(OracleBounds {
        pair: BoundPair {
            lower: lo.clamp(-1.0, 1.0),
            upper: hi.clamp(-1.0, 1.0),
            method: BoundMethod::Pearl,
        },
        projected: lambda > 0.0,
        projection_lambda: lambda,
    })
}
