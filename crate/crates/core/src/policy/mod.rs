//! Feasible-set construction, welfare and regret computation, and the exact
//! and greedy assignment solvers.

pub mod effects;
pub mod evaluate;
pub mod solve;

pub use effects::{config_welfare, CohortEffects};
pub use evaluate::{
    aggregate_matrix, solve_day, specialization_shares, utilization, welfare_by_diagnosis,
    DayPolicyOutcome, DiagnosisGain, PolicyChoice, PolicyKind, PolicyMatrix, PolicyMetrics,
    RegretMetric, UtilizationRow, POLICY_KINDS, REGRET_METRICS,
};
pub use solve::{
    enumerate_feasible, point_regret, solve_exact, solve_greedy, Criterion, PolicyEntry,
    SolverMode,
};
