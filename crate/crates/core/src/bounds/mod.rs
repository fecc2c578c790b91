//! Per-patient partial-identification bounds: frequentist confidence sets,
//! Manski worst-case bounds, IV bounds from the response-type polytope, and
//! an independent linear-programming oracle for verification.

pub mod attach;
pub mod joint;
pub mod oracle;
pub mod pair;

pub use attach::{
    attach_bounds, case_bounds, estimate_joint_probs, manski_inputs, summarize_bounds,
    BoundSummary, CaseBounds, MIN_ARM_WEIGHT,
};
pub use joint::JointProbs;
pub use oracle::{lp_oracle_bounds, OracleBounds};
pub use pair::{frequentist_bounds, manski_bounds, pearl_bounds, BoundMethod, BoundPair, PearlBounds};
