//! Aggregate effect estimates and identification diagnostics: ATE/CATE with
//! plug-in standard errors, first-stage strength and common-support reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ivforest::IvForest;
use crate::forest::nuisance::NuisanceEstimates;

/// ATE over query points: the mean of per-point IATE predictions.
///
/// The standard error is a sandwich plug-in over the aggregated training
/// moment: with case-averaged weights o_j, D = sum_j o_j * den_j and
/// SE^2 = sum_j o_j^2 (num_j - tau * den_j)^2 / D^2. A single query point
/// carries no dispersion information and reports SE = 0 by convention.
pub fn ate(forest: &IvForest, queries: &[Vec<f64>]) -> Result<(f64, f64)> {
    if queries.is_empty() {
        return Err(Error::Data("ate: no query points".into()));
    }
    let mut omega = vec![0.0f64; forest.n_train];
    let mut tau_sum = 0.0;
    for q in queries {
        let est = forest.predict(q)?;
        tau_sum += est.tau_hat;
        let alpha = forest.weights(q);
        for (o, a) in omega.iter_mut().zip(&alpha) {
            *o += a / queries.len() as f64;
        }
    }
    let tau_bar = tau_sum / queries.len() as f64;
    if queries.len() <= 1 {
        return Ok((tau_bar, 0.0));
    }
    let mut d = 0.0;
    let mut ss = 0.0;
    for j in 0..forest.n_train {
        if forest.excluded[j] || omega[j] == 0.0 {
            continue;
        }
        d += omega[j] * forest.den[j];
        ss += omega[j].powi(2) * (forest.num[j] - tau_bar * forest.den[j]).powi(2);
    }
    if d.abs() < 1e-12 {
        return Err(Error::Numeric("degenerate aggregate first stage".into()));
    }
    Ok((tau_bar, (ss / (d * d)).sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CateRow {
    pub group: String,
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
}

/// Group-wise conditional effects. Groups present in `grouping` but without
/// any cases are omitted and listed in the returned notes.
pub fn cate_by_group(
    forest: &IvForest,
    queries: &[Vec<f64>],
    grouping: &[String],
) -> Result<(Vec<CateRow>, Vec<String>)> {
    if queries.len() != grouping.len() {
        return Err(Error::Data(
            "cate_by_group: grouping length mismatch".into(),
        ));
    }
    let mut by_group: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (q, g) in queries.iter().zip(grouping) {
        by_group.entry(g.clone()).or_default().push(q.clone());
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (group, qs) in by_group {
        if qs.is_empty() {
            notes.push(format!("group {group} omitted: no cases"));
            continue;
        }
        let (estimate, std_error) = ate(forest, &qs)?;
        rows.push(CateRow {
            group,
            n: qs.len(),
            estimate,
            std_error,
        });
    }
    Ok((rows, notes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstStage {
    /// R^2 of regressing W on Z alone.
    pub r_squared: f64,
    /// F statistic of the instrument coefficient in that regression.
    pub f_statistic: f64,
    /// Same metrics on covariate-residualized W and Z (W - p_hat on Z - e_hat).
    pub residualized_r_squared: f64,
    pub residualized_f_statistic: f64,
    /// Formula documentation carried into report metadata.
    pub formula: &'static str,
}

pub const FIRST_STAGE_FORMULA: &str =
    "R2 = corr(W,Z)^2; F = (n-2) R2/(1-R2); residualized variant uses W-p_hat and Z-e_hat";

fn corr_metrics(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_b < 1e-12 {
        return Err(Error::Data("zero variance in the instrument".into()));
    }
    if var_a < 1e-12 {
        // no treatment variation: no first stage at all
        return Ok((0.0, 0.0));
    }
    let r2 = (cov * cov) / (var_a * var_b);
    let f = if (1.0 - r2).abs() < 1e-12 {
        f64::INFINITY
    } else {
        (n - 2.0) * r2 / (1.0 - r2)
    };
    Ok((r2, f))
}

pub fn first_stage_diagnostics(
    w: &[u8],
    z: &[u8],
    nuisances: &NuisanceEstimates,
) -> Result<FirstStage> {
    if w.len() != z.len() || w.is_empty() {
        return Err(Error::Data("first stage: empty or mismatched inputs".into()));
    }
    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let (r_squared, f_statistic) = corr_metrics(&wf, &zf)?;
    let rw: Vec<f64> = wf
        .iter()
        .zip(&nuisances.p_hat)
        .map(|(w, p)| w - p)
        .collect();
    let rz: Vec<f64> = zf
        .iter()
        .zip(&nuisances.e_hat)
        .map(|(z, e)| z - e)
        .collect();
    let (residualized_r_squared, residualized_f_statistic) = corr_metrics(&rw, &rz)?;
    Ok(FirstStage {
        r_squared,
        f_statistic,
        residualized_r_squared,
        residualized_f_statistic,
        formula: FIRST_STAGE_FORMULA,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapReport {
    /// (bin_low, bin_high, count W=1, count W=0); 20 bins over the unit interval.
    pub bins: Vec<(f64, f64, usize, usize)>,
    /// Share of cases with propensity inside [0.05, 0.95].
    pub overlap_share: f64,
}

pub fn overlap_report(p_hat: &[f64], w: &[u8]) -> OverlapReport {
    const NBINS: usize = 20;
    let mut treated = [0usize; NBINS];
    let mut control = [0usize; NBINS];
    let mut inside = 0usize;
    for (p, &wi) in p_hat.iter().zip(w) {
        let bin = ((p * NBINS as f64).floor() as usize).min(NBINS - 1);
        if wi == 1 {
            treated[bin] += 1;
        } else {
            control[bin] += 1;
        }
        if (0.05..=0.95).contains(p) {
            inside += 1;
        }
    }
    let bins = (0..NBINS)
        .map(|b| {
            (
                b as f64 / NBINS as f64,
                (b + 1) as f64 / NBINS as f64,
                treated[b],
                control[b],
            )
        })
        .collect();
    OverlapReport {
        bins,
        overlap_share: if p_hat.is_empty() {
            0.0
        } else {
            inside as f64 / p_hat.len() as f64
        },
    }
}

/// Histogram of compliance scores over [-1, 1], 40 bins.
pub fn compliance_histogram(tauw_hat: &[f64]) -> Vec<(f64, f64, usize)> {
    const NBINS: usize = 40;
    let mut counts = [0usize; NBINS];
    for t in tauw_hat {
        let pos = ((t + 1.0) / 2.0 * NBINS as f64).floor() as usize;
        counts[pos.min(NBINS - 1)] += 1;
    }
    (0..NBINS)
        .map(|b| {
            (
                -1.0 + 2.0 * b as f64 / NBINS as f64,
                -1.0 + 2.0 * (b + 1) as f64 / NBINS as f64,
                counts[b],
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_first_stage() {
        let z: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let w = z.clone();
        let nu = NuisanceEstimates {
            m_hat: vec![0.5; 100],
            e_hat: vec![0.5; 100],
            p_hat: vec![0.5; 100],
            tauw_hat: vec![1.0; 100],
        };
        let fs = first_stage_diagnostics(&w, &z, &nu).unwrap();
        assert!((fs.r_squared - 1.0).abs() < 1e-12);
        assert!(fs.f_statistic.is_infinite());
    }

    #[test]
    fn constant_instrument_errors() {
        let z = vec![1u8; 50];
        let w: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let nu = NuisanceEstimates {
            m_hat: vec![0.5; 50],
            e_hat: vec![0.5; 50],
            p_hat: vec![0.5; 50],
            tauw_hat: vec![1.0; 50],
        };
        assert!(first_stage_diagnostics(&w, &z, &nu).is_err());
    }

    #[test]
    fn overlap_extremes() {
        // p_hat constant 0.5: a single nonempty bin, share 1
        let p = vec![0.5; 30];
        let w: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let r = overlap_report(&p, &w);
        let nonempty = r.bins.iter().filter(|(_, _, t, c)| t + c > 0).count();
        assert_eq!(nonempty, 1);
        assert!((r.overlap_share - 1.0).abs() < 1e-12);

        // p_hat in {0,1} only: share 0
        let p: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
        let r = overlap_report(&p, &w);
        assert_eq!(r.overlap_share, 0.0);
    }
}
