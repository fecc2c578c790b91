//! Report emission. Every file mirrors one of the study's table shapes and
//! carries a data_source column so synthetic runs cannot be mistaken for
//! replications; rows derive from test-day cases only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::bounds::CaseBounds;
use crate::domain::{CovariateSchema, DayCohort, DaySplit, OccupancyIndex, PatientCase, Unit};
use crate::error::Result;
use crate::forest::{
    ate, cate_by_group, compliance_histogram, overlap_report, FirstStage, IvForest,
    NuisanceValues,
};
use crate::policy::{
    aggregate_matrix, specialization_shares, utilization, welfare_by_diagnosis, CohortEffects,
    DayPolicyOutcome, PolicyKind, POLICY_KINDS,
};

pub struct ReportInputs<'a> {
    pub data_source: &'a str,
    pub schema: &'a CovariateSchema,
    pub test_cases: &'a [PatientCase],
    pub forest: &'a IvForest,
    pub case_bounds: &'a [CaseBounds],
    pub test_nuisances: &'a [NuisanceValues],
    pub first_stage: &'a FirstStage,
    pub outcomes_by_rho: &'a BTreeMap<String, Vec<DayPolicyOutcome>>,
    pub cohorts: &'a [DayCohort],
    pub effects: &'a [CohortEffects],
    pub occupancy: &'a OccupancyIndex,
    pub split: &'a DaySplit,
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_reports(inputs: &ReportInputs<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let src = inputs.data_source;

    // summary_stats.csv
    {
        let cases = inputs.test_cases;
        let subsets: [(&str, Vec<&PatientCase>); 3] = [
            ("overall", cases.iter().collect()),
            ("intmed", cases.iter().filter(|c| c.treatment == 1).collect()),
            ("surg", cases.iter().filter(|c| c.treatment == 0).collect()),
        ];
        let mean =
            |v: &[f64]| -> f64 { v.iter().sum::<f64>() / (v.len().max(1)) as f64 };
        let mut rows = Vec::new();
        let metrics: Vec<(&str, Box<dyn Fn(&PatientCase) -> f64>)> = vec![
            ("n", Box::new(|_| 1.0)),
            ("survival", Box::new(|c| c.outcome as f64)),
            ("intmed_share", Box::new(|c| c.treatment as f64)),
            (
                "high_emergency_share",
                Box::new(|c| c.instrument.unwrap_or(0) as f64),
            ),
        ];
        for (name, f) in &metrics {
            let mut row = vec![name.to_string()];
            for (_, subset) in &subsets {
                let vals: Vec<f64> = subset.iter().map(|c| f(c)).collect();
                if *name == "n" {
                    row.push(format!("{}", subset.len()));
                } else {
                    row.push(fmt(mean(&vals)));
                }
            }
            row.push("test".into());
            row.push(src.into());
            rows.push(row);
        }
        // overlap share from held-out propensities
        let p_hat: Vec<f64> = inputs.test_nuisances.iter().map(|n| n.p_hat).collect();
        let w: Vec<u8> = cases.iter().map(|c| c.treatment).collect();
        let overlap = overlap_report(&p_hat, &w);
        rows.push(vec![
            "overlap_share".into(),
            fmt(overlap.overlap_share),
            String::new(),
            String::new(),
            "test".into(),
            src.into(),
        ]);
        let path = out_dir.join("summary_stats.csv");
        write_csv(
            &path,
            &["metric", "overall", "intmed", "surg", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // first_stage.csv
    {
        let fs = inputs.first_stage;
        let rows = vec![
            vec![
                "simple".into(),
                fmt(fs.r_squared),
                fmt(fs.f_statistic),
                fs.formula.to_string(),
                "test".into(),
                src.into(),
            ],
            vec![
                "residualized".into(),
                fmt(fs.residualized_r_squared),
                fmt(fs.residualized_f_statistic),
                fs.formula.to_string(),
                "test".into(),
                src.into(),
            ],
        ];
        let path = out_dir.join("first_stage.csv");
        write_csv(
            &path,
            &["model", "r_squared", "f_statistic", "formula", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // ate_cate.csv
    {
        let queries: Vec<Vec<f64>> = inputs
            .test_cases
            .iter()
            .map(|c| c.covariates.clone())
            .collect();
        let (ate_est, ate_se) = ate(inputs.forest, &queries)?;
        let mut rows = vec![vec![
            "ate".into(),
            String::new(),
            format!("{}", queries.len()),
            fmt(ate_est),
            fmt(ate_se),
            "test".into(),
            src.into(),
        ]];
        let grouping: Vec<String> = inputs
            .test_cases
            .iter()
            .map(|c| c.diagnosis_group.to_string())
            .collect();
        let (cates, _notes) = cate_by_group(inputs.forest, &queries, &grouping)?;
        for c in cates {
            rows.push(vec![
                "cate_diagnosis".into(),
                c.group,
                format!("{}", c.n),
                fmt(c.estimate),
                fmt(c.std_error),
                "test".into(),
                src.into(),
            ]);
        }
        let path = out_dir.join("ate_cate.csv");
        write_csv(
            &path,
            &["row_type", "group", "n", "estimate", "std_error", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // bounds_summary.csv
    {
        let summary = crate::bounds::summarize_bounds(inputs.case_bounds);
        let rows = vec![
            vec![
                "frequentist".into(),
                fmt(summary.frequentist.0),
                fmt(summary.frequentist.1),
                "0".into(),
                "test".into(),
                src.into(),
            ],
            vec![
                "manski".into(),
                fmt(summary.manski.0),
                fmt(summary.manski.1),
                "0".into(),
                "test".into(),
                src.into(),
            ],
            vec![
                "pearl".into(),
                fmt(summary.pearl.0),
                fmt(summary.pearl.1),
                format!("{}", summary.n_pearl_crossed),
                "test".into(),
                src.into(),
            ],
        ];
        let path = out_dir.join("bounds_summary.csv");
        write_csv(
            &path,
            &["method", "lower", "upper", "n_crossed", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // policy_matrix_rho_<key>.csv
    for (key, outcomes) in inputs.outcomes_by_rho {
        let matrix = aggregate_matrix(outcomes);
        let metric_rows: [(&str, Box<dyn Fn(&crate::policy::PolicyMetrics) -> f64>); 7] = [
            ("welfare", Box::new(|m| m.welfare_per_patient)),
            ("welfare_gain", Box::new(|m| m.welfare_gain_per_patient)),
            ("point_regret", Box::new(|m| m.regret_point)),
            ("frequentist_regret", Box::new(|m| m.regret_freq)),
            ("manski_regret", Box::new(|m| m.regret_manski)),
            ("pearl_regret", Box::new(|m| m.regret_pearl)),
            (
                "total_reassignments",
                Box::new(|m| m.total_reassignments as f64),
            ),
        ];
        let mut rows = Vec::new();
        for (name, f) in &metric_rows {
            let mut row = vec![name.to_string()];
            for kind in POLICY_KINDS {
                row.push(fmt(f(&matrix.rows[&kind])));
            }
            row.push("test".into());
            row.push(src.into());
            rows.push(row);
        }
        let path = out_dir.join(format!("policy_matrix_rho_{key}.csv"));
        write_csv(
            &path,
            &[
                "metric",
                "observed",
                "welfare_max",
                "minimax_freq",
                "minimax_manski",
                "minimax_pearl",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    let unconstrained = &inputs.outcomes_by_rho["none"];
    let cohort_refs: Vec<&DayCohort> = inputs.cohorts.iter().collect();
    let effect_refs: Vec<&CohortEffects> = inputs.effects.iter().collect();

    // utilization.csv (welfare-max policy, unconstrained)
    {
        let rows: Vec<Vec<String>> = utilization(unconstrained, &cohort_refs, PolicyKind::WelfareMax)
            .into_iter()
            .map(|r| {
                vec![
                    r.hospital,
                    r.unit,
                    fmt(r.observed_mean),
                    fmt(r.policy_mean),
                    format!("{}", r.observed_max),
                    format!("{}", r.policy_max),
                    "test".into(),
                    src.into(),
                ]
            })
            .collect();
        let path = out_dir.join("utilization.csv");
        write_csv(
            &path,
            &[
                "hospital",
                "unit",
                "observed_mean",
                "policy_mean",
                "observed_max",
                "policy_max",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // specialization_shares.csv
    {
        let shares = specialization_shares(unconstrained, &cohort_refs);
        let rows: Vec<Vec<String>> = shares
            .into_iter()
            .map(|(diag, by_policy)| {
                let mut row = vec![diag];
                for kind in POLICY_KINDS {
                    row.push(fmt(by_policy[&kind]));
                }
                row.push("test".into());
                row.push(src.into());
                row
            })
            .collect();
        let path = out_dir.join("specialization_shares.csv");
        write_csv(
            &path,
            &[
                "diagnosis",
                "observed",
                "welfare_max",
                "minimax_freq",
                "minimax_manski",
                "minimax_pearl",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // welfare_by_diagnosis.csv
    {
        let gains = welfare_by_diagnosis(
            unconstrained,
            &cohort_refs,
            &effect_refs,
            PolicyKind::WelfareMax,
        );
        let rows: Vec<Vec<String>> = gains
            .into_iter()
            .map(|g| {
                vec![
                    g.diagnosis,
                    format!("{}", g.n),
                    fmt(g.avg_gain),
                    fmt(g.total_gain),
                    "test".into(),
                    src.into(),
                ]
            })
            .collect();
        let path = out_dir.join("welfare_by_diagnosis.csv");
        write_csv(
            &path,
            &[
                "diagnosis",
                "n",
                "avg_welfare_gain",
                "total_welfare_gain",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // busyness_timeseries.csv (test days)
    {
        let mut rows = Vec::new();
        for cohort in inputs.cohorts {
            for unit in [Unit::IntMed, Unit::Surgical] {
                let b = inputs
                    .occupancy
                    .busyness(&cohort.hospital_id, unit, cohort.day);
                rows.push(vec![
                    cohort.hospital_id.to_string(),
                    cohort.day.to_string(),
                    unit.to_string(),
                    format!("{b}"),
                    "test".into(),
                    src.into(),
                ]);
            }
        }
        let path = out_dir.join("busyness_timeseries.csv");
        write_csv(
            &path,
            &["hospital", "day", "unit", "busyness", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // cate_by_busyness.csv: intmed-busyness bins of width 5, per hospital
    {
        let mut grouping = Vec::new();
        let queries: Vec<Vec<f64>> = inputs
            .test_cases
            .iter()
            .map(|c| c.covariates.clone())
            .collect();
        for case in inputs.test_cases {
            let b = case.covariates[inputs.schema.busy_intmed_idx()];
            let bin = (b / 5.0).floor() as i64 * 5;
            grouping.push(format!("{}|{}", case.hospital_id, bin));
        }
        let (cates, _notes) = cate_by_group(inputs.forest, &queries, &grouping)?;
        let rows: Vec<Vec<String>> = cates
            .into_iter()
            .map(|c| {
                let (hospital, bin) = c.group.split_once('|').unwrap_or(("?", "0"));
                let low: i64 = bin.parse().unwrap_or(0);
                vec![
                    hospital.to_string(),
                    format!("{low}"),
                    format!("{}", low + 5),
                    format!("{}", c.n),
                    fmt(c.estimate),
                    fmt(c.std_error),
                    "test".into(),
                    src.into(),
                ]
            })
            .collect();
        let path = out_dir.join("cate_by_busyness.csv");
        write_csv(
            &path,
            &[
                "hospital",
                "busy_bin_low",
                "busy_bin_high",
                "n",
                "estimate",
                "std_error",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // propensity_hist.csv
    {
        let p_hat: Vec<f64> = inputs.test_nuisances.iter().map(|n| n.p_hat).collect();
        let w: Vec<u8> = inputs.test_cases.iter().map(|c| c.treatment).collect();
        let report = overlap_report(&p_hat, &w);
        let rows: Vec<Vec<String>> = report
            .bins
            .iter()
            .map(|(lo, hi, t, c)| {
                vec![
                    fmt(*lo),
                    fmt(*hi),
                    format!("{t}"),
                    format!("{c}"),
                    "test".into(),
                    src.into(),
                ]
            })
            .collect();
        let path = out_dir.join("propensity_hist.csv");
        write_csv(
            &path,
            &["bin_low", "bin_high", "count_treated", "count_control", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // compliance_hist.csv
    {
        let tauw: Vec<f64> = inputs.test_nuisances.iter().map(|n| n.tauw_hat).collect();
        let rows: Vec<Vec<String>> = compliance_histogram(&tauw)
            .into_iter()
            .map(|(lo, hi, n)| {
                vec![fmt(lo), fmt(hi), format!("{n}"), "test".into(), src.into()]
            })
            .collect();
        let path = out_dir.join("compliance_hist.csv");
        write_csv(
            &path,
            &["bin_low", "bin_high", "count", "split_origin", "data_source"],
            &rows,
        )?;
        files.push(path);
    }

    // bounds_per_case.csv
    {
        let rows: Vec<Vec<String>> = inputs
            .test_cases
            .iter()
            .zip(inputs.case_bounds)
            .map(|(case, b)| {
                vec![
                    case.case_id.clone(),
                    fmt(b.estimate.tau_hat),
                    fmt(b.estimate.sigma2_hat),
                    fmt(b.frequentist.lower),
                    fmt(b.frequentist.upper),
                    fmt(b.manski.lower),
                    fmt(b.manski.upper),
                    fmt(b.pearl.lower),
                    fmt(b.pearl.upper),
                    format!("{}", u8::from(b.pearl_crossed)),
                    "test".into(),
                    src.into(),
                ]
            })
            .collect();
        let path = out_dir.join("bounds_per_case.csv");
        write_csv(
            &path,
            &[
                "case_id",
                "tau_hat",
                "sigma2",
                "freq_lower",
                "freq_upper",
                "manski_lower",
                "manski_upper",
                "pearl_lower",
                "pearl_upper",
                "pearl_crossed",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // policy_days.csv: per-day, per-policy, per-rho detail
    {
        let mut rows = Vec::new();
        for (key, outcomes) in inputs.outcomes_by_rho {
            for outcome in outcomes {
                for kind in POLICY_KINDS {
                    let choice = &outcome.choices[&kind];
                    rows.push(vec![
                        key.clone(),
                        outcome.hospital_id.to_string(),
                        outcome.day.to_string(),
                        format!("{}", outcome.cohort_size),
                        outcome.mode.as_str().to_string(),
                        kind.as_str().to_string(),
                        choice.config.as_bitstring(),
                        fmt(choice.welfare),
                        fmt(choice.regret_point),
                        fmt(choice.regret_freq),
                        fmt(choice.regret_manski),
                        fmt(choice.regret_pearl),
                        format!("{}", choice.reassignments),
                        "test".into(),
                        src.into(),
                    ]);
                }
            }
        }
        let path = out_dir.join("policy_days.csv");
        write_csv(
            &path,
            &[
                "rho",
                "hospital",
                "day",
                "cohort_size",
                "solver_mode",
                "policy",
                "config",
                "welfare",
                "regret_point",
                "regret_freq",
                "regret_manski",
                "regret_pearl",
                "reassignments",
                "split_origin",
                "data_source",
            ],
            &rows,
        )?;
        files.push(path);
    }

    // keep the split reproducible for audits
    {
        let mut rows = Vec::new();
        for (h, d) in &inputs.split.train_days {
            rows.push(vec![h.to_string(), d.to_string(), "train".into(), src.into()]);
        }
        for (h, d) in &inputs.split.test_days {
            rows.push(vec![h.to_string(), d.to_string(), "test".into(), src.into()]);
        }
        let path = out_dir.join("day_split.csv");
        write_csv(&path, &["hospital", "day", "split", "data_source"], &rows)?;
        files.push(path);
    }

    Ok(files)
}
