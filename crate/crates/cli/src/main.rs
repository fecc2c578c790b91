//! Command-line front end: synthetic data generation, forest fitting, bound
//! attachment, policy solving, and the full report pipeline.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wardopt::bounds::{attach_bounds, summarize_bounds};
use wardopt::domain::{
    build_cohorts, build_instrument, split_days, CapacityLimits, HospitalId, PatientCase, Unit,
};
use wardopt::error::{Error, Result};
use wardopt::forest::IvForest;
use wardopt::pipeline::{case_matrix, load_data, refresh_busyness, rho_key, LoadedData, RunConfig};
use wardopt::policy::{solve_day, CohortEffects, POLICY_KINDS};
use wardopt::synth;

#[derive(Parser)]
#[command(name = "wardopt", about = "Ward placement effects, bounds and assignment policies")]
struct Cli {
    /// Run configuration (TOML). Defaults to the built-in synthetic config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Chatty progress on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cases, occupancy and ground truth CSVs.
    Synth,
    /// Fit the IV causal forest on the training split and save it.
    Fit(FitArgs),
    /// Attach per-case bounds on the test split.
    Bounds(BoundsArgs),
    /// Solve daily assignment policies on the test split.
    Policy(PolicyArgs),
    /// Run all stages and emit the report files only.
    Report,
    /// Full pipeline: reports, artifacts and manifest.
    Run,
}

#[derive(Args)]
struct FitArgs {
    /// Number of trees.
    #[arg(long)]
    trees: Option<usize>,
    /// Minimum observations per instrument arm in leaves.
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Forest seed override (otherwise derived from the master seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Forest output path (default <out_dir>/forest.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Fitted forest path.
    #[arg(long)]
    forest: PathBuf,
    /// Confidence level parameter for the frequentist bounds.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory for the bound CSVs (default <out_dir>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyArgs {
    /// Fitted forest path.
    #[arg(long)]
    forest: PathBuf,
    /// Per-case bounds CSV for cross-checking case alignment (optional).
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Capacity CSV (hospital_id,year,unit,capacity) overriding derived caps.
    #[arg(long)]
    caps: Option<PathBuf>,
    /// Reassignment limit; repeatable. The unconstrained case always runs.
    #[arg(long)]
    rho: Vec<f64>,
    /// Largest cohort solved exactly.
    #[arg(long)]
    exact_threshold: Option<usize>,
    /// Output directory (default <out_dir>).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default_synth(),
    };
    if let Some(seed) = cli.seed {
        // re-resolving keeps every derived stage seed consistent
        let text = match &cli.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot re-read config: {e}")))?,
            None => String::new(),
        };
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("bad config: {e}")))?;
        doc.insert("seed".into(), toml::Value::Integer(seed as i64));
        cfg = RunConfig::from_toml_str(&toml::to_string(&doc).expect("toml"))?;
    }
    if let Some(out) = &cli.out_dir {
        cfg.out_dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    }
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

struct Prepared {
    data: LoadedData,
    train: Vec<PatientCase>,
    test: Vec<PatientCase>,
}

fn prepare(cfg: &RunConfig, verbose: bool) -> Result<Prepared> {
    let mut data = load_data(cfg)?;
    if data.needs_instrument {
        build_instrument(&mut data.cases)?;
    }
    refresh_busyness(&mut data.cases, &data.schema, &data.occupancy);
    let mut days: Vec<_> = data
        .cases
        .iter()
        .map(|c| (c.hospital_id.clone(), c.admit_day))
        .collect();
    days.sort();
    days.dedup();
    let split = split_days(&days, cfg.split_fraction, cfg.split_seed)?;
    let train: Vec<PatientCase> = data
        .cases
        .iter()
        .filter(|c| split.is_train(&c.hospital_id, c.admit_day))
        .cloned()
        .collect();
    let test: Vec<PatientCase> = data
        .cases
        .iter()
        .filter(|c| split.is_test(&c.hospital_id, c.admit_day))
        .cloned()
        .collect();
    if verbose {
        eprintln!(
            "prepared {} cases ({} train / {} test over {} days)",
            data.cases.len(),
            train.len(),
            test.len(),
            days.len()
        );
    }
    Ok(Prepared {
        data,
        train,
        test,
    })
}

fn binary_columns(cases: &[PatientCase]) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>)> {
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut z = Vec::new();
    for c in cases {
        y.push(c.outcome);
        w.push(c.treatment);
        z.push(c.instrument_or_err()?);
    }
    Ok((y, w, z))
}

fn read_caps_csv(path: &PathBuf) -> Result<CapacityLimits> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read caps file: {e}")))?;
    let mut caps = CapacityLimits::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("caps file: {e}")))?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let year: i32 = get(1)
            .parse()
            .map_err(|_| Error::Data(format!("caps file: bad year '{}'", get(1))))?;
        let unit = Unit::parse(&get(2))?;
        let cap: u32 = get(3)
            .parse()
            .map_err(|_| Error::Data(format!("caps file: bad capacity '{}'", get(3))))?;
        caps.set(HospitalId(get(0)), year, unit, cap);
    }
    Ok(caps)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth => {
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| Error::Config(format!("cannot create out_dir: {e}")))?;
            let data = synth::generate(&cfg.dgp)?;
            synth::write_cases_csv(&cfg.out_dir.join("cases.csv"), &data.cases, &data.schema)?;
            synth::write_occupancy_csv(&cfg.out_dir.join("occupancy.csv"), &data.stays)?;
            synth::write_ground_truth_csv(&cfg.out_dir.join("ground_truth.csv"), &data.truth)?;
            println!(
                "wrote {} cases, {} stays to {}",
                data.cases.len(),
                data.stays.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Fit(args) => {
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| Error::Config(format!("cannot create out_dir: {e}")))?;
            let prepared = prepare(&cfg, cli.verbose)?;
            let mut params = cfg.forest.clone();
            if let Some(trees) = args.trees {
                params.n_trees = trees;
            }
            if let Some(min_leaf) = args.min_leaf {
                params.min_leaf = min_leaf;
            }
            if let Some(seed) = args.seed {
                params.seed = seed;
            }
            let x = case_matrix(&prepared.train)?;
            let (y, w, z) = binary_columns(&prepared.train)?;
            let forest = IvForest::fit(&x, &y, &w, &z, params, prepared.data.schema.hash())?;
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("forest.json"));
            forest.save(&out)?;
            println!(
                "fitted {} trees on {} cases -> {}",
                forest.trees.len(),
                prepared.train.len(),
                out.display()
            );
            Ok(())
        }
        Command::Bounds(args) => {
            let out_dir = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Error::Config(format!("cannot create out dir: {e}")))?;
            let prepared = prepare(&cfg, cli.verbose)?;
            let forest = IvForest::load(&args.forest)?;
            if forest.schema_hash != prepared.data.schema.hash() {
                return Err(Error::Data(
                    "forest schema hash does not match the configured schema".into(),
                ));
            }
            let alpha = args.alpha.unwrap_or(cfg.alpha);
            let rows: Vec<Vec<f64>> = prepared.test.iter().map(|c| c.covariates.clone()).collect();
            let bounds = attach_bounds(&forest, &rows, alpha)?;
            let mut writer = csv::Writer::from_path(out_dir.join("bounds_per_case.csv"))
                .map_err(Error::Csv)?;
            writer
                .write_record([
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
                ])
                .map_err(Error::Csv)?;
            for (case, b) in prepared.test.iter().zip(&bounds) {
                writer
                    .write_record([
                        case.case_id.clone(),
                        format!("{}", b.estimate.tau_hat),
                        format!("{}", b.estimate.sigma2_hat),
                        format!("{}", b.frequentist.lower),
                        format!("{}", b.frequentist.upper),
                        format!("{}", b.manski.lower),
                        format!("{}", b.manski.upper),
                        format!("{}", b.pearl.lower),
                        format!("{}", b.pearl.upper),
                        format!("{}", u8::from(b.pearl_crossed)),
                    ])
                    .map_err(Error::Csv)?;
            }
            writer.flush().map_err(Error::Io)?;
            let summary = summarize_bounds(&bounds);
            let mut sw = csv::Writer::from_path(out_dir.join("bounds_summary.csv"))
                .map_err(Error::Csv)?;
            sw.write_record(["method", "lower", "upper", "n_crossed"])
                .map_err(Error::Csv)?;
            for (name, (lo, hi), crossed) in [
                ("frequentist", summary.frequentist, 0),
                ("manski", summary.manski, 0),
                ("pearl", summary.pearl, summary.n_pearl_crossed),
            ] {
                sw.write_record([
                    name.to_string(),
                    format!("{lo}"),
                    format!("{hi}"),
                    format!("{crossed}"),
                ])
                .map_err(Error::Csv)?;
            }
            sw.flush().map_err(Error::Io)?;
            println!(
                "bounds for {} test cases -> {}",
                bounds.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Policy(args) => {
            let out_dir = args.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Error::Config(format!("cannot create out dir: {e}")))?;
            let prepared = prepare(&cfg, cli.verbose)?;
            let forest = IvForest::load(&args.forest)?;
            if forest.schema_hash != prepared.data.schema.hash() {
                return Err(Error::Data(
                    "forest schema hash does not match the configured schema".into(),
                ));
            }
            if let Some(bounds_csv) = &args.bounds {
                check_bounds_alignment(bounds_csv, &prepared.test)?;
            }
            let caps = match &args.caps {
                Some(path) => read_caps_csv(path)?,
                None => prepared.data.capacities.clone(),
            };
            let exact_threshold = args.exact_threshold.unwrap_or(cfg.exact_threshold);
            let cohorts = build_cohorts(&prepared.test, &prepared.data.occupancy);
            let effects: Vec<CohortEffects> = cohorts
                .iter()
                .map(|c| CohortEffects::from_forest(&forest, c, &prepared.data.schema, cfg.alpha))
                .collect::<Result<_>>()?;
            let mut rho_grid: Vec<Option<f64>> = vec![None];
            rho_grid.extend(args.rho.iter().map(|&r| Some(r)));
            if args.rho.is_empty() {
                rho_grid.extend(cfg.rho_values.iter().map(|&r| Some(r)));
            }
            let mut writer =
                csv::Writer::from_path(out_dir.join("policy_days.csv")).map_err(Error::Csv)?;
            writer
                .write_record([
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
                ])
                .map_err(Error::Csv)?;
            for rho in &rho_grid {
                for (cohort, eff) in cohorts.iter().zip(&effects) {
                    let outcome = solve_day(cohort, eff, &caps, *rho, exact_threshold)?;
                    for kind in POLICY_KINDS {
                        let choice = &outcome.choices[&kind];
                        writer
                            .write_record([
                                rho_key(*rho),
                                outcome.hospital_id.to_string(),
                                outcome.day.to_string(),
                                format!("{}", outcome.cohort_size),
                                outcome.mode.as_str().to_string(),
                                kind.as_str().to_string(),
                                choice.config.as_bitstring(),
                                format!("{}", choice.welfare),
                                format!("{}", choice.regret_point),
                                format!("{}", choice.regret_freq),
                                format!("{}", choice.regret_manski),
                                format!("{}", choice.regret_pearl),
                                format!("{}", choice.reassignments),
                            ])
                            .map_err(Error::Csv)?;
                    }
                }
            }
            writer.flush().map_err(Error::Io)?;
            println!(
                "solved {} days x {} rho settings -> {}",
                cohorts.len(),
                rho_grid.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Report | Command::Run => {
            let output = wardopt::pipeline::run_pipeline(&cfg)?;
            println!(
                "pipeline complete: {} files in {} (manifest.json lists hashes)",
                output.manifest.files.len(),
                output.out_dir.display()
            );
            Ok(())
        }
    }
}

fn check_bounds_alignment(path: &PathBuf, test: &[PatientCase]) -> Result<()> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Data(format!("bounds csv: {e}")))?;
    let ids: std::collections::BTreeSet<String> = reader
        .records()
        .filter_map(|r| r.ok())
        .filter_map(|r| r.get(0).map(|s| s.to_string()))
        .collect();
    for case in test {
        if !ids.contains(&case.case_id) {
            return Err(Error::Data(format!(
                "bounds file does not cover test case {}",
                case.case_id
            )));
        }
    }
    Ok(())
}
