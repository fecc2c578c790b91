//! End-to-end pipeline: configuration, stage orchestration and report
//! emission.

pub mod config;
pub mod reports;
pub mod run;

pub use config::{derive_seed, RunConfig, RunMode};
pub use reports::{emit_reports, ReportInputs};
pub use run::{
    case_matrix, load_data, refresh_busyness, rho_key, run_pipeline, LoadedData, Manifest,
    ManifestEntry, PipelineOutput,
};
