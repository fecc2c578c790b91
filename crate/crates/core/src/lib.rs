//! Ward-placement effect estimation and assignment policies.
//!
//! The crate estimates individualized effects of internal-medicine versus
//! surgical ward placement with an honest instrumental-variable causal
//! forest, attaches per-patient partial-identification bounds, and solves
//! daily capacity-constrained assignment problems under welfare-maximization
//! and minimax-regret criteria. A synthetic data generator with known ground
//! truth backs validation; real-format CSV data can be ingested through the
//! same pipeline.

pub mod bounds;
pub mod domain;
pub mod error;
pub mod forest;
pub mod policy;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
