//! Day-level policy solving across all decision rules plus aggregation into
//! the policy-by-metric evaluation matrix and the operational reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundMethod;
use crate::domain::{AssignmentConfig, CapacityLimits, DayCohort, HospitalId, Unit};
use crate::error::Result;
use crate::policy::effects::{config_welfare, CohortEffects};
use crate::policy::solve::{
    enumerate_feasible, greedy_candidates, Criterion, SolverMode,
};

pub const POLICY_KINDS: [PolicyKind; 5] = [
    PolicyKind::Observed,
    PolicyKind::WelfareMax,
    PolicyKind::MinimaxFreq,
    PolicyKind::MinimaxManski,
    PolicyKind::MinimaxPearl,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    Observed,
    WelfareMax,
    MinimaxFreq,
    MinimaxManski,
    MinimaxPearl,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Observed => "observed",
            PolicyKind::WelfareMax => "welfare_max",
            PolicyKind::MinimaxFreq => "minimax_freq",
            PolicyKind::MinimaxManski => "minimax_manski",
            PolicyKind::MinimaxPearl => "minimax_pearl",
        }
    }

    fn criterion(self) -> Option<Criterion> {
        match self {
            PolicyKind::Observed => None,
            PolicyKind::WelfareMax => Some(Criterion::WelfareMax),
            PolicyKind::MinimaxFreq => Some(Criterion::Minimax(BoundMethod::Frequentist)),
            PolicyKind::MinimaxManski => Some(Criterion::Minimax(BoundMethod::Manski)),
            PolicyKind::MinimaxPearl => Some(Criterion::Minimax(BoundMethod::Pearl)),
        }
    }
}

/// One policy's chosen configuration on one day, with all four regret
/// metrics evaluated against the day's candidate set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyChoice {
    pub config: AssignmentConfig,
    pub welfare: f64,
    pub regret_point: f64,
    pub regret_freq: f64,
    pub regret_manski: f64,
    pub regret_pearl: f64,
    pub reassignments: usize,
}

impl PolicyChoice {
    pub fn regret(&self, metric: RegretMetric) -> f64 {
        match metric {
            RegretMetric::Point => self.regret_point,
            RegretMetric::Frequentist => self.regret_freq,
            RegretMetric::Manski => self.regret_manski,
            RegretMetric::Pearl => self.regret_pearl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegretMetric {
    Point,
    Frequentist,
    Manski,
    Pearl,
}

pub const REGRET_METRICS: [RegretMetric; 4] = [
    RegretMetric::Point,
    RegretMetric::Frequentist,
    RegretMetric::Manski,
    RegretMetric::Pearl,
];

impl RegretMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            RegretMetric::Point => "point",
            RegretMetric::Frequentist => "frequentist",
            RegretMetric::Manski => "manski",
            RegretMetric::Pearl => "pearl",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayPolicyOutcome {
    pub hospital_id: HospitalId,
    pub day: chrono::NaiveDate,
    pub cohort_size: usize,
    pub mode: SolverMode,
    pub choices: BTreeMap<PolicyKind, PolicyChoice>,
}

/// Solves one day under every policy. Exact days evaluate the full feasible
/// set; larger days fall back to greedy candidates (the union over
/// criteria, so cross-evaluated regrets share one reference set).
pub fn solve_day(
    cohort: &DayCohort,
    effects: &CohortEffects,
    caps: &CapacityLimits,
    rho: Option<f64>,
    exact_threshold: usize,
) -> Result<DayPolicyOutcome> {
    let observed = cohort.observed_config();
    let (candidates, mode) = if cohort.size() <= exact_threshold {
        (
            enumerate_feasible(cohort, caps, rho, exact_threshold)?,
            SolverMode::Exact,
        )
    } else {
        let mut pool = Vec::new();
        for criterion in [
            Criterion::WelfareMax,
            Criterion::Minimax(BoundMethod::Frequentist),
            Criterion::Minimax(BoundMethod::Manski),
            Criterion::Minimax(BoundMethod::Pearl),
        ] {
            pool.extend(greedy_candidates(cohort, effects, caps, rho, criterion)?);
        }
        pool.sort_by(|a, b| a.bits().cmp(b.bits()));
        pool.dedup();
        (pool, SolverMode::Greedy)
    };
    if candidates.is_empty() {
        return Err(crate::error::Error::Data(format!(
            "empty feasible set for {}/{}",
            cohort.hospital_id, cohort.day
        )));
    }

    // candidate-set welfare maxima per table
    let max_point = candidates
        .iter()
        .map(|c| config_welfare(c, effects, None))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut max_lower = BTreeMap::new();
    for method in [
        BoundMethod::Frequentist,
        BoundMethod::Manski,
        BoundMethod::Pearl,
    ] {
        let m = candidates
            .iter()
            .map(|c| config_welfare(c, effects, Some(method)))
            .fold(f64::NEG_INFINITY, f64::max);
        max_lower.insert(method.as_str(), m);
    }

    let regret_under = |cfg: &AssignmentConfig, method: BoundMethod| -> f64 {
        let point = max_point - config_welfare(cfg, effects, None);
        let lower = max_lower[method.as_str()] - config_welfare(cfg, effects, Some(method));
        point.max(lower)
    };

    let choice_for = |cfg: &AssignmentConfig| PolicyChoice {
        config: cfg.clone(),
        welfare: config_welfare(cfg, effects, None),
        regret_point: max_point - config_welfare(cfg, effects, None),
        regret_freq: regret_under(cfg, BoundMethod::Frequentist),
        regret_manski: regret_under(cfg, BoundMethod::Manski),
        regret_pearl: regret_under(cfg, BoundMethod::Pearl),
        reassignments: cfg.reassignments_from(&observed),
    };

    // selection with the shared tie-break: fewest reassignments, then
    // lexicographic bits
    let pick = |criterion: Criterion| -> AssignmentConfig {
        let mut best: Option<(f64, &AssignmentConfig)> = None;
        for cfg in &candidates {
            let score = match criterion {
                Criterion::WelfareMax => -config_welfare(cfg, effects, None),
                Criterion::Minimax(m) => regret_under(cfg, m),
            };
            let replace = match &best {
                None => true,
                Some((bs, bc)) => {
                    score < bs - 1e-12
                        || ((score - bs).abs() <= 1e-12 && {
                            let rc = cfg.reassignments_from(&observed);
                            let rb = bc.reassignments_from(&observed);
                            rc < rb || (rc == rb && cfg.bits() < bc.bits())
                        })
                }
            };
            if replace {
                best = Some((score, cfg));
            }
        }
        best.expect("nonempty candidate set").1.clone()
    };

    let mut choices = BTreeMap::new();
    for kind in POLICY_KINDS {
        let cfg = match kind.criterion() {
            None => observed.clone(),
            Some(criterion) => pick(criterion),
        };
        choices.insert(kind, choice_for(&cfg));
    }

    Ok(DayPolicyOutcome {
        hospital_id: cohort.hospital_id.clone(),
        day: cohort.day,
        cohort_size: cohort.size(),
        mode,
        choices,
    })
}

/// Policy-by-metric matrix aggregated over days: per-patient welfare gain
/// over the observed assignment and per-patient mean regrets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyMatrix {
    pub n_patients: usize,
    pub n_days: usize,
    /// per policy: (welfare gain per patient, regret per patient by metric)
    pub rows: BTreeMap<PolicyKind, PolicyMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub welfare_per_patient: f64,
    pub welfare_gain_per_patient: f64,
    pub regret_point: f64,
    pub regret_freq: f64,
    pub regret_manski: f64,
    pub regret_pearl: f64,
    pub total_reassignments: usize,
}

pub fn aggregate_matrix(outcomes: &[DayPolicyOutcome]) -> PolicyMatrix {
    let n_patients: usize = outcomes.iter().map(|o| o.cohort_size).sum();
    let denom = n_patients.max(1) as f64;
    let mut rows = BTreeMap::new();
    for kind in POLICY_KINDS {
        let mut welfare = 0.0;
        let mut gain = 0.0;
        let mut regrets = [0.0f64; 4];
        let mut reass = 0usize;
        for o in outcomes {
            let choice = &o.choices[&kind];
            let obs = &o.choices[&PolicyKind::Observed];
            welfare += choice.welfare;
            gain += choice.welfare - obs.welfare;
            regrets[0] += choice.regret_point;
            regrets[1] += choice.regret_freq;
            regrets[2] += choice.regret_manski;
            regrets[3] += choice.regret_pearl;
            reass += choice.reassignments;
        }
        rows.insert(
            kind,
            PolicyMetrics {
                welfare_per_patient: welfare / denom,
                welfare_gain_per_patient: gain / denom,
                regret_point: regrets[0] / denom,
                regret_freq: regrets[1] / denom,
                regret_manski: regrets[2] / denom,
                regret_pearl: regrets[3] / denom,
                total_reassignments: reass,
            },
        );
    }
    PolicyMatrix {
        n_patients,
        n_days: outcomes.len(),
        rows,
    }
}

/// Per-diagnosis welfare gains under one policy (welfare-max in reports):
/// each patient contributes its assigned-column effect minus its observed
/// contribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosisGain {
    pub diagnosis: String,
    pub n: usize,
    pub avg_gain: f64,
    pub total_gain: f64,
}

pub fn welfare_by_diagnosis(
    outcomes: &[DayPolicyOutcome],
    cohorts: &[&DayCohort],
    effects: &[&CohortEffects],
    kind: PolicyKind,
) -> Vec<DiagnosisGain> {
    let mut totals: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for ((outcome, cohort), eff) in outcomes.iter().zip(cohorts).zip(effects) {
        let choice = &outcome.choices[&kind];
        let obs = &outcome.choices[&PolicyKind::Observed];
        let j_new = choice.config.n_intmed();
        let j_obs = obs.config.n_intmed();
        for (i, case) in cohort.cases.iter().enumerate() {
            let contrib_new = if choice.config.bit(i) {
                eff.tau_point[i][j_new]
            } else {
                0.0
            };
            let contrib_obs = if obs.config.bit(i) {
                eff.tau_point[i][j_obs]
            } else {
                0.0
            };
            let e = totals
                .entry(case.diagnosis_group.to_string())
                .or_insert((0, 0.0));
            e.0 += 1;
            e.1 += contrib_new - contrib_obs;
        }
    }
    totals
        .into_iter()
        .map(|(diagnosis, (n, total_gain))| DiagnosisGain {
            diagnosis,
            n,
            avg_gain: total_gain / n.max(1) as f64,
            total_gain,
        })
        .collect()
}

/// Share of patients placed into internal medicine, per diagnosis group and
/// policy.
pub fn specialization_shares(
    outcomes: &[DayPolicyOutcome],
    cohorts: &[&DayCohort],
) -> BTreeMap<String, BTreeMap<PolicyKind, f64>> {
    let mut counts: BTreeMap<String, (usize, BTreeMap<PolicyKind, usize>)> = BTreeMap::new();
    for (outcome, cohort) in outcomes.iter().zip(cohorts) {
        for (i, case) in cohort.cases.iter().enumerate() {
            let entry = counts
                .entry(case.diagnosis_group.to_string())
                .or_insert_with(|| (0, BTreeMap::new()));
            entry.0 += 1;
            for kind in POLICY_KINDS {
                if outcome.choices[&kind].config.bit(i) {
                    *entry.1.entry(kind).or_insert(0) += 1;
                }
            }
        }
    }
    counts
        .into_iter()
        .map(|(diag, (n, by_policy))| {
            let shares = POLICY_KINDS
                .into_iter()
                .map(|k| {
                    (
                        k,
                        by_policy.get(&k).copied().unwrap_or(0) as f64 / n.max(1) as f64,
                    )
                })
                .collect();
            (diag, shares)
        })
        .collect()
}

/// Mean and max unit busyness (baseline plus placements) per hospital under
/// the observed assignment and one policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub hospital: String,
    pub unit: String,
    pub observed_mean: f64,
    pub policy_mean: f64,
    pub observed_max: u32,
    pub policy_max: u32,
}

pub fn utilization(
    outcomes: &[DayPolicyOutcome],
    cohorts: &[&DayCohort],
    kind: PolicyKind,
) -> Vec<UtilizationRow> {
    struct Acc {
        obs_sum: f64,
        pol_sum: f64,
        obs_max: u32,
        pol_max: u32,
        n: usize,
    }
    let mut acc: BTreeMap<(HospitalId, Unit), Acc> = BTreeMap::new();
    for (outcome, cohort) in outcomes.iter().zip(cohorts) {
        let choice = &outcome.choices[&kind];
        let obs = &outcome.choices[&PolicyKind::Observed];
        for unit in [Unit::IntMed, Unit::Surgical] {
            let baseline = match unit {
                Unit::IntMed => cohort.baseline_busy_intmed,
                Unit::Surgical => cohort.baseline_busy_surg,
            };
            let placed_pol = match unit {
                Unit::IntMed => choice.config.n_intmed(),
                Unit::Surgical => choice.config.n_surg(),
            } as u32;
            let placed_obs = match unit {
                Unit::IntMed => obs.config.n_intmed(),
                Unit::Surgical => obs.config.n_surg(),
            } as u32;
            let e = acc
                .entry((cohort.hospital_id.clone(), unit))
                .or_insert(Acc {
                    obs_sum: 0.0,
                    pol_sum: 0.0,
                    obs_max: 0,
                    pol_max: 0,
                    n: 0,
                });
            e.obs_sum += (baseline + placed_obs) as f64;
            e.pol_sum += (baseline + placed_pol) as f64;
            e.obs_max = e.obs_max.max(baseline + placed_obs);
            e.pol_max = e.pol_max.max(baseline + placed_pol);
            e.n += 1;
        }
    }
    acc.into_iter()
        .map(|((h, u), a)| UtilizationRow {
            hospital: h.to_string(),
            unit: u.to_string(),
            observed_mean: a.obs_sum / a.n.max(1) as f64,
            policy_mean: a.pol_sum / a.n.max(1) as f64,
            observed_max: a.obs_max,
            policy_max: a.pol_max,
        })
        .collect()
}
