//! Exact and greedy solvers over feasible assignment configurations.
//!
//! Exact: full enumeration of the capacity- and reassignment-feasible set
//! (practical up to the configured threshold). Greedy: rank-and-take per
//! headcount, or swap moves from the observed assignment when a
//! reassignment budget applies.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundMethod;
use crate::domain::{
    is_feasible, reassignment_budget, AssignmentConfig, CapacityLimits, DayCohort, Unit,
};
use crate::error::{Error, Result};
use crate::policy::effects::{config_welfare, CohortEffects};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    WelfareMax,
    Minimax(BoundMethod),
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::WelfareMax => "welfare_max",
            Criterion::Minimax(BoundMethod::Frequentist) => "minimax_freq",
            Criterion::Minimax(BoundMethod::Manski) => "minimax_manski",
            Criterion::Minimax(BoundMethod::Pearl) => "minimax_pearl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverMode {
    Exact,
    Greedy,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Exact => "exact",
            SolverMode::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub config: AssignmentConfig,
    pub welfare: f64,
    /// Objective value under the requested criterion (welfare for
    /// welfare-max, regret for minimax).
    pub objective: f64,
    pub mode: SolverMode,
    pub reassignments: usize,
}

/// Every feasible configuration, in mask order. Errors above the exact
/// threshold; use the greedy solver there.
pub fn enumerate_feasible(
    cohort: &DayCohort,
    caps: &CapacityLimits,
    rho: Option<f64>,
    exact_threshold: usize,
) -> Result<Vec<AssignmentConfig>> {
    let p = cohort.size();
    if p > exact_threshold {
        return Err(Error::Config(format!(
            "cohort size {p} exceeds exact threshold {exact_threshold}; use the greedy solver"
        )));
    }
    let mut out = Vec::new();
    for mask in 0..(1u64 << p) {
        let cfg = AssignmentConfig::from_mask(mask, p);
        if is_feasible(&cfg, cohort, caps, rho)? {
            out.push(cfg);
        }
    }
    Ok(out)
}

/// Welfare maxima over a candidate set, per table.
struct SetMaxima {
    max_point: f64,
    max_lower: [f64; 3], // frequentist, manski, pearl
}

fn bound_slot(method: BoundMethod) -> usize {
    match method {
        BoundMethod::Frequentist => 0,
        BoundMethod::Manski => 1,
        BoundMethod::Pearl => 2,
    }
}

fn set_maxima(candidates: &[AssignmentConfig], effects: &CohortEffects) -> SetMaxima {
    let mut max_point = f64::NEG_INFINITY;
    let mut max_lower = [f64::NEG_INFINITY; 3];
    for cfg in candidates {
        max_point = max_point.max(config_welfare(cfg, effects, None));
        for (slot, method) in [
            BoundMethod::Frequentist,
            BoundMethod::Manski,
            BoundMethod::Pearl,
        ]
        .into_iter()
        .enumerate()
        {
            max_lower[slot] = max_lower[slot].max(config_welfare(cfg, effects, Some(method)));
        }
    }
    SetMaxima {
        max_point,
        max_lower,
    }
}

/// Regret under uncertainty: the worse of the point-welfare shortfall and
/// the lower-bound-welfare shortfall, both against the same candidate set.
fn regret(
    cfg: &AssignmentConfig,
    effects: &CohortEffects,
    maxima: &SetMaxima,
    method: BoundMethod,
) -> f64 {
    let point_regret = maxima.max_point - config_welfare(cfg, effects, None);
    let lower_regret =
        maxima.max_lower[bound_slot(method)] - config_welfare(cfg, effects, Some(method));
    point_regret.max(lower_regret)
}

/// Point-welfare regret (used to cross-evaluate the welfare-max policy).
pub fn point_regret(cfg: &AssignmentConfig, effects: &CohortEffects, max_point: f64) -> f64 {
    max_point - config_welfare(cfg, effects, None)
}

/// Ties break to fewer reassignments from the observed assignment, then to
/// the lexicographically smallest configuration.
fn better_config(
    score_a: f64,
    a: &AssignmentConfig,
    score_b: f64,
    b: &AssignmentConfig,
    observed: &AssignmentConfig,
    maximize: bool,
) -> bool {
    let eps = 1e-12;
    let diff = score_a - score_b;
    if diff.abs() > eps {
        return if maximize { diff > 0.0 } else { diff < 0.0 };
    }
    let ra = a.reassignments_from(observed);
    let rb = b.reassignments_from(observed);
    if ra != rb {
        return ra < rb;
    }
    a.bits() < b.bits()
}

fn select(
    candidates: &[AssignmentConfig],
    effects: &CohortEffects,
    observed: &AssignmentConfig,
    criterion: Criterion,
    maxima: &SetMaxima,
    mode: SolverMode,
) -> Result<PolicyEntry> {
    if candidates.is_empty() {
        return Err(Error::Data("empty feasible set".into()));
    }
    let mut best: Option<(f64, &AssignmentConfig)> = None;
    for cfg in candidates {
        let score = match criterion {
            Criterion::WelfareMax => config_welfare(cfg, effects, None),
            Criterion::Minimax(method) => regret(cfg, effects, maxima, method),
        };
        let maximize = matches!(criterion, Criterion::WelfareMax);
        match &best {
            None => best = Some((score, cfg)),
            Some((bs, bc)) => {
                if better_config(score, cfg, *bs, bc, observed, maximize) {
                    best = Some((score, cfg));
                }
            }
        }
    }
    let (objective, config) = best.expect("nonempty candidates");
    Ok(PolicyEntry {
        welfare: config_welfare(config, effects, None),
        objective,
        reassignments: config.reassignments_from(observed),
        config: config.clone(),
        mode,
    })
}

/// Optimal configuration by full enumeration of the feasible set.
pub fn solve_exact(
    cohort: &DayCohort,
    effects: &CohortEffects,
    caps: &CapacityLimits,
    rho: Option<f64>,
    criterion: Criterion,
    exact_threshold: usize,
) -> Result<PolicyEntry> {
    let candidates = enumerate_feasible(cohort, caps, rho, exact_threshold)?;
    let maxima = set_maxima(&candidates, effects);
    select(
        &candidates,
        effects,
        &cohort.observed_config(),
        criterion,
        &maxima,
        SolverMode::Exact,
    )
}

/// Feasible internal-medicine headcounts under the capacity constraints.
fn feasible_headcounts(cohort: &DayCohort, caps: &CapacityLimits) -> Result<Vec<usize>> {
    let p = cohort.size();
    let cap_i = caps.get(&cohort.hospital_id, cohort.year(), Unit::IntMed)?;
    let cap_s = caps.get(&cohort.hospital_id, cohort.year(), Unit::Surgical)?;
    let max_j = (cap_i.saturating_sub(cohort.baseline_busy_intmed) as usize).min(p);
    let surg_room = cap_s.saturating_sub(cohort.baseline_busy_surg) as usize;
    let min_j = p.saturating_sub(surg_room);
    Ok((min_j..=max_j).collect())
}

/// Greedy candidates and selection. Without a reassignment budget the solver
/// ranks patients by a policy-specific score and takes the top j for every
/// feasible headcount j; with a budget it applies the best scoring swap
/// moves from the observed assignment until the budget is exhausted. The
/// observed configuration is always a candidate, so greedy welfare never
/// falls below observed welfare when rho is absent.
pub fn solve_greedy(
    cohort: &DayCohort,
    effects: &CohortEffects,
    caps: &CapacityLimits,
    rho: Option<f64>,
    criterion: Criterion,
) -> Result<PolicyEntry> {
    let candidates = greedy_candidates(cohort, effects, caps, rho, criterion)?;
    let maxima = set_maxima(&candidates, effects);
    select(
        &candidates,
        effects,
        &cohort.observed_config(),
        criterion,
        &maxima,
        SolverMode::Greedy,
    )
}

/// Score used for greedy ranking: the point estimate, or its average with
/// the selected lower bound for minimax variants.
fn greedy_score(effects: &CohortEffects, criterion: Criterion, i: usize, j: usize) -> f64 {
    match criterion {
        Criterion::WelfareMax => effects.tau_point[i][j],
        Criterion::Minimax(method) => {
            0.5 * (effects.tau_point[i][j] + effects.table(Some(method))[i][j])
        }
    }
}

pub(crate) fn greedy_candidates(
    cohort: &DayCohort,
    effects: &CohortEffects,
    caps: &CapacityLimits,
    rho: Option<f64>,
    criterion: Criterion,
) -> Result<Vec<AssignmentConfig>> {
    let p = cohort.size();
    let observed = cohort.observed_config();
    let mut candidates = Vec::new();
    if is_feasible(&observed, cohort, caps, rho)? {
        candidates.push(observed.clone());
    }

    match rho {
        None => {
            for j in feasible_headcounts(cohort, caps)? {
                let mut ranked: Vec<usize> = (0..p).collect();
                ranked.sort_by(|&a, &b| {
                    greedy_score(effects, criterion, b, j)
                        .total_cmp(&greedy_score(effects, criterion, a, j))
                        .then(a.cmp(&b))
                });
                let chosen: std::collections::BTreeSet<usize> =
                    ranked.into_iter().take(j).collect();
                let cfg = AssignmentConfig::new((0..p).map(|i| chosen.contains(&i)).collect());
                if is_feasible(&cfg, cohort, caps, None)? {
                    candidates.push(cfg);
                }
            }
        }
        Some(rho) => {
            let budget = reassignment_budget(rho, p);
            let mut current = observed.clone();
            for _ in 0..budget {
                let current_score = scoring_welfare(&current, effects, criterion);
                let mut best_flip: Option<(f64, usize)> = None;
                for i in 0..p {
                    let mut bits = current.bits().to_vec();
                    bits[i] = !bits[i];
                    let cand = AssignmentConfig::new(bits);
                    if !is_feasible(&cand, cohort, caps, Some(rho))? {
                        continue;
                    }
                    let s = scoring_welfare(&cand, effects, criterion);
                    if s > current_score + 1e-12
                        && best_flip.map(|(bs, _)| s > bs).unwrap_or(true)
                    {
                        best_flip = Some((s, i));
                    }
                }
                match best_flip {
                    Some((_, i)) => {
                        let mut bits = current.bits().to_vec();
                        bits[i] = !bits[i];
                        current = AssignmentConfig::new(bits);
                        candidates.push(current.clone());
                    }
                    None => break,
                }
            }
        }
    }
    candidates.dedup_by(|a, b| a == b);
    Ok(candidates)
}

fn scoring_welfare(cfg: &AssignmentConfig, effects: &CohortEffects, criterion: Criterion) -> f64 {
    let j = cfg.n_intmed();
    (0..cfg.len())
        .filter(|&i| cfg.bit(i))
        .map(|i| greedy_score(effects, criterion, i, j))
        .sum()
}
