//! Synthetic data generation with known ground truth, plus real-format CSV
//! ingestion.

pub mod dgp;
pub mod ingest;

pub use dgp::{
    default_schema, generate, hospital_name, BaselineFn, ComplianceMix, ComplianceType, DgpSpec,
    EffectFn, GroundTruth, SynthData,
};
pub use ingest::{
    read_cases_csv, read_occupancy_csv, write_cases_csv, write_ground_truth_csv,
    write_occupancy_csv, IngestedCases,
};
