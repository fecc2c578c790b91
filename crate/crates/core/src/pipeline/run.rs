//! End-to-end pipeline: data, instrument, busyness, split, forest, bounds,
//! policy, reports. Every stage failure names the stage; reruns under the
//! same master seed produce byte-identical outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{attach_bounds, CaseBounds};
use crate::domain::{
    build_cohorts, build_instrument, split_days, CapacityLimits, CovariateSchema, DayCohort,
    DaySplit, OccupancyIndex, PatientCase, Unit,
};
use crate::error::{Error, Result};
use crate::forest::{first_stage_diagnostics, IvForest, Matrix, NuisanceValues};
use crate::pipeline::config::{RunConfig, RunMode};
use crate::pipeline::reports::{emit_reports, ReportInputs};
use crate::policy::{solve_day, CohortEffects, DayPolicyOutcome};
use crate::synth;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub mode: String,
    pub files: Vec<ManifestEntry>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(crate::domain::schema::hex_string(&h.finalize()))
}

/// Data loaded or generated by the first stage.
pub struct LoadedData {
    pub cases: Vec<PatientCase>,
    pub stays: Vec<crate::domain::StayRecord>,
    pub occupancy: OccupancyIndex,
    pub capacities: CapacityLimits,
    pub schema: CovariateSchema,
    pub truth: Option<synth::GroundTruth>,
    pub needs_instrument: bool,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    match cfg.mode {
        RunMode::Synth => {
            let data = synth::generate(&cfg.dgp)?;
            let occupancy = OccupancyIndex::build(&data.stays)?;
            Ok(LoadedData {
                cases: data.cases,
                stays: data.stays,
                occupancy,
                capacities: data.capacities,
                schema: data.schema,
                truth: Some(data.truth),
                needs_instrument: false,
            })
        }
        RunMode::Ingest => {
            let cases_path = cfg.cases_path.as_ref().expect("validated in config");
            let occ_path = cfg.occupancy_path.as_ref().expect("validated in config");
            let ingested = synth::read_cases_csv(cases_path, &cfg.schema)?;
            let stays = synth::read_occupancy_csv(occ_path)?;
            let occupancy = OccupancyIndex::build(&stays)?;
            let capacities = occupancy.derive_capacities();
            Ok(LoadedData {
                cases: ingested.cases,
                stays,
                occupancy,
                capacities,
                schema: cfg.schema.clone(),
                truth: None,
                needs_instrument: ingested.needs_instrument,
            })
        }
    }
}

/// Overwrites the busyness covariate slots with pre-placement occupancy so
/// both data sources share one definition.
pub fn refresh_busyness(
    cases: &mut [PatientCase],
    schema: &CovariateSchema,
    occupancy: &OccupancyIndex,
) {
    for case in cases.iter_mut() {
        let bi = occupancy.busyness(&case.hospital_id, Unit::IntMed, case.admit_day);
        let bs = occupancy.busyness(&case.hospital_id, Unit::Surgical, case.admit_day);
        schema.set_busyness(&mut case.covariates, bi as f64, bs as f64);
    }
}

pub fn case_matrix(cases: &[PatientCase]) -> Result<Matrix> {
    Matrix::from_rows(cases.iter().map(|c| c.covariates.clone()).collect())
}

fn binary_columns(cases: &[PatientCase]) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>)> {
    let mut y = Vec::with_capacity(cases.len());
    let mut w = Vec::with_capacity(cases.len());
    let mut z = Vec::with_capacity(cases.len());
    for c in cases {
        y.push(c.outcome);
        w.push(c.treatment);
        z.push(c.instrument_or_err()?);
    }
    Ok((y, w, z))
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

/// Rho grid key used in file names and result maps.
pub fn rho_key(rho: Option<f64>) -> String {
    match rho {
        None => "none".to_string(),
        Some(r) => format!("{r:.2}"),
    }
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Config(format!("cannot create out_dir: {e}")))?;

    // -- data
    let data_stage = match cfg.mode {
        RunMode::Synth => "synth",
        RunMode::Ingest => "ingest",
    };
    let mut data = load_data(cfg).map_err(|e| e.in_stage(data_stage))?;

    // -- instrument
    if data.needs_instrument {
        build_instrument(&mut data.cases).map_err(|e| e.in_stage("instrument"))?;
    }

    // -- busyness
    refresh_busyness(&mut data.cases, &data.schema, &data.occupancy);

    // -- split
    let mut days: Vec<_> = data
        .cases
        .iter()
        .map(|c| (c.hospital_id.clone(), c.admit_day))
        .collect();
    days.sort();
    days.dedup();
    let split = split_days(&days, cfg.split_fraction, cfg.split_seed)
        .map_err(|e| e.in_stage("split"))?;
    let train_cases: Vec<PatientCase> = data
        .cases
        .iter()
        .filter(|c| split.is_train(&c.hospital_id, c.admit_day))
        .cloned()
        .collect();
    let test_cases: Vec<PatientCase> = data
        .cases
        .iter()
        .filter(|c| split.is_test(&c.hospital_id, c.admit_day))
        .cloned()
        .collect();
    if train_cases.is_empty() || test_cases.is_empty() {
        return Err(Error::Data("split produced an empty partition".into()).in_stage("split"));
    }

    // -- fit
    let x_train = case_matrix(&train_cases).map_err(|e| e.in_stage("fit"))?;
    let (y_train, w_train, z_train) =
        binary_columns(&train_cases).map_err(|e| e.in_stage("fit"))?;
    let forest = IvForest::fit(
        &x_train,
        &y_train,
        &w_train,
        &z_train,
        cfg.forest.clone(),
        data.schema.hash(),
    )
    .map_err(|e| e.in_stage("fit"))?;
    let forest_path = cfg.out_dir.join("forest.json");
    forest.save(&forest_path).map_err(|e| e.in_stage("fit"))?;

    // -- bounds (per test case, at observed busyness)
    let test_rows: Vec<Vec<f64>> = test_cases.iter().map(|c| c.covariates.clone()).collect();
    let case_bounds: Vec<CaseBounds> =
        attach_bounds(&forest, &test_rows, cfg.alpha).map_err(|e| e.in_stage("bounds"))?;
    let test_nuisances: Vec<NuisanceValues> = test_rows
        .iter()
        .map(|r| forest.nuisance_predictor.predict(r))
        .collect();
    let (_, w_test, z_test) = binary_columns(&test_cases).map_err(|e| e.in_stage("bounds"))?;
    let test_nu_est = crate::forest::NuisanceEstimates {
        m_hat: test_nuisances.iter().map(|n| n.m_hat).collect(),
        e_hat: test_nuisances.iter().map(|n| n.e_hat).collect(),
        p_hat: test_nuisances.iter().map(|n| n.p_hat).collect(),
        tauw_hat: test_nuisances.iter().map(|n| n.tauw_hat).collect(),
    };
    let first_stage = first_stage_diagnostics(&w_test, &z_test, &test_nu_est)
        .map_err(|e| e.in_stage("bounds"))?;

    // -- policy
    let cohorts: Vec<DayCohort> = build_cohorts(&test_cases, &data.occupancy);
    let effects: Vec<CohortEffects> = cohorts
        .iter()
        .map(|cohort| CohortEffects::from_forest(&forest, cohort, &data.schema, cfg.alpha))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("policy"))?;
    let mut rho_grid: Vec<Option<f64>> = vec![None];
    rho_grid.extend(cfg.rho_values.iter().map(|&r| Some(r)));
    let mut outcomes_by_rho: BTreeMap<String, Vec<DayPolicyOutcome>> = BTreeMap::new();
    for rho in &rho_grid {
        let outcomes: Vec<DayPolicyOutcome> = cohorts
            .iter()
            .zip(&effects)
            .map(|(cohort, eff)| {
                solve_day(cohort, eff, &data.capacities, *rho, cfg.exact_threshold)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("policy"))?;
        outcomes_by_rho.insert(rho_key(*rho), outcomes);
    }

    // -- report
    let data_source = match cfg.mode {
        RunMode::Synth => "synthetic",
        RunMode::Ingest => "ingested",
    };
    let mut files = emit_reports(
        &ReportInputs {
            data_source,
            schema: &data.schema,
            test_cases: &test_cases,
            forest: &forest,
            case_bounds: &case_bounds,
            test_nuisances: &test_nuisances,
            first_stage: &first_stage,
            outcomes_by_rho: &outcomes_by_rho,
            cohorts: &cohorts,
            effects: &effects,
            occupancy: &data.occupancy,
            split: &split,
        },
        &cfg.out_dir,
    )
    .map_err(|e| e.in_stage("report"))?;

    // synth mode also records the generated data alongside the reports so a
    // run can be re-ingested
    if cfg.mode == RunMode::Synth {
        let cases_path = cfg.out_dir.join("cases.csv");
        synth::write_cases_csv(&cases_path, &data.cases, &data.schema)
            .map_err(|e| e.in_stage("report"))?;
        files.push(cases_path);
        let occ_path = cfg.out_dir.join("occupancy.csv");
        synth::write_occupancy_csv(&occ_path, &data.stays).map_err(|e| e.in_stage("report"))?;
        files.push(occ_path);
        if let Some(truth) = &data.truth {
            let truth_path = cfg.out_dir.join("ground_truth.csv");
            synth::write_ground_truth_csv(&truth_path, truth).map_err(|e| e.in_stage("report"))?;
            files.push(truth_path);
        }
    }
    files.push(forest_path);

    // -- manifest
    let mut entries = Vec::new();
    for f in &files {
        entries.push(ManifestEntry {
            name: f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_file(f)?,
        });
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest {
        seed: cfg.seed,
        mode: data_source.to_string(),
        files: entries,
    };
    let manifest_path = cfg.out_dir.join("manifest.json");
    let writer = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    serde_json::to_writer_pretty(writer, &manifest)
        .map_err(|e| Error::Data(format!("manifest write failed: {e}")))?;

    Ok(PipelineOutput {
        manifest,
        out_dir: cfg.out_dir.clone(),
    })
}

/// One DaySplit row per split partition, for debug tagging.
pub fn split_tag(split: &DaySplit, cohort: &DayCohort) -> &'static str {
    if split.is_test(&cohort.hospital_id, cohort.day) {
        "test"
    } else {
        "train"
    }
}
