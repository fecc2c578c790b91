//! Honest instrumental-variable causal forest: cross-fitted nuisances, IV
//! splitting, adaptive neighborhood weights, IATE prediction with variance
//! and identification diagnostics.

pub mod data;
pub mod diagnostics;
pub mod ivforest;
pub mod ivtree;
pub mod nuisance;
pub mod regression;

pub use data::Matrix;
pub use diagnostics::{
    ate, cate_by_group, compliance_histogram, first_stage_diagnostics, overlap_report, CateRow,
    FirstStage, OverlapReport,
};
pub use ivforest::{pseudo_outcome, EffectEstimate, IvForest, IvForestParams};
pub use ivtree::{grow_tree, leaf_iv_estimate, IvTree, LeafSignal};
pub use nuisance::{fit_nuisance, NuisanceEstimates, NuisancePredictor, NuisanceValues};
pub use regression::{RegressionForest, RegressionParams};
