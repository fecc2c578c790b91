//! Run configuration: a TOML key-value file covering data source, schema,
//! splitting, forest hyperparameters, bound level and policy settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::CovariateSchema;
use crate::error::{Error, Result};
use crate::forest::IvForestParams;
use crate::synth::{default_schema, BaselineFn, ComplianceMix, DgpSpec, EffectFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Synth,
    Ingest,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    seed: Option<u64>,
    out_dir: Option<String>,
    threads: Option<usize>,
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    schema: RawSchema,
    #[serde(default)]
    split: RawSplit,
    #[serde(default)]
    forest: RawForest,
    #[serde(default)]
    bounds: RawBounds,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    synth: RawSynth,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    cases: Option<String>,
    occupancy: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    fraction: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawForest {
    trees: Option<usize>,
    min_leaf: Option<usize>,
    subsample_fraction: Option<f64>,
    honesty_fraction: Option<f64>,
    mtry: Option<usize>,
    denom_floor: Option<f64>,
    folds: Option<usize>,
    nuisance_trees: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    exact_threshold: Option<usize>,
    rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSynth {
    n_hospitals: Option<usize>,
    n_days: Option<usize>,
    start_day: Option<String>,
    patients_per_day_min: Option<usize>,
    patients_per_day_max: Option<usize>,
    instrument_prob: Option<f64>,
    confounding_strength: Option<f64>,
    capacity_intmed: Option<u32>,
    capacity_surg: Option<u32>,
    background_occupancy: Option<u32>,
    effect: Option<RawEffect>,
    baseline_intercept: Option<f64>,
    baseline_x_cont_coef: Option<f64>,
    compliance: Option<RawCompliance>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEffect {
    kind: String,
    value: Option<f64>,
    column: Option<String>,
    slope: Option<f64>,
    intercept: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompliance {
    complier: f64,
    always_taker: f64,
    never_taker: f64,
    defier: Option<f64>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: RunMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub cases_path: Option<PathBuf>,
    pub occupancy_path: Option<PathBuf>,
    pub schema: CovariateSchema,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub forest: IvForestParams,
    pub alpha: f64,
    pub exact_threshold: usize,
    /// Reassignment limits to evaluate in addition to the unconstrained run.
    pub rho_values: Vec<f64>,
    pub dgp: DgpSpec,
}

/// Stage seeds derive from the master seed by stable hashing of the stage
/// name, so stages are independent and the whole run is reproducible.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

fn effect_from_raw(raw: &RawEffect) -> Result<EffectFn> {
    let base = match raw.kind.as_str() {
        "constant" => EffectFn::Constant {
            value: raw
                .value
                .ok_or_else(|| Error::Config("effect.kind constant needs value".into()))?,
        },
        "linear" => EffectFn::Linear {
            column: raw
                .column
                .clone()
                .ok_or_else(|| Error::Config("effect.kind linear needs column".into()))?,
            slope: raw.slope.unwrap_or(0.0),
            intercept: raw.intercept.unwrap_or(0.0),
        },
        "busyness" => {
            let inner = EffectFn::Linear {
                column: raw
                    .column
                    .clone()
                    .unwrap_or_else(|| "x_bin".to_string()),
                slope: raw.slope.unwrap_or(0.0),
                intercept: raw.intercept.unwrap_or(0.0),
            };
            return Ok(EffectFn::BusynessInteracted {
                base: Box::new(inner),
                gamma: raw.gamma.unwrap_or(0.2),
            });
        }
        other => {
            return Err(Error::Config(format!(
                "unknown effect kind '{other}' (constant | linear | busyness)"
            )))
        }
    };
    Ok(base)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        Self::resolve(raw)
    }

    pub fn default_synth() -> RunConfig {
        Self::resolve(RawConfig::default()).expect("default config resolves")
    }

    fn resolve(raw: RawConfig) -> Result<RunConfig> {
        let mode = match raw.mode.as_deref() {
            None | Some("synth") => RunMode::Synth,
            Some("ingest") => RunMode::Ingest,
            Some(other) => {
                return Err(Error::Config(format!(
                    "mode must be synth or ingest, got '{other}'"
                )))
            }
        };
        let seed = raw.seed.unwrap_or(42);

        let schema = match (&raw.schema.columns, mode) {
            (Some(cols), _) => CovariateSchema::new(cols.clone())?,
            (None, RunMode::Synth) => default_schema(),
            (None, RunMode::Ingest) => {
                return Err(Error::Config(
                    "ingest mode requires schema.columns".into(),
                ))
            }
        };
        if mode == RunMode::Synth && schema != default_schema() {
            return Err(Error::Config(
                "synth mode uses the generator's schema; omit schema.columns or match it".into(),
            ));
        }
        let (cases_path, occupancy_path) = match mode {
            RunMode::Ingest => {
                let cases = raw.paths.cases.clone().ok_or_else(|| {
                    Error::Config("ingest mode requires paths.cases".into())
                })?;
                let occ = raw.paths.occupancy.clone().ok_or_else(|| {
                    Error::Config("ingest mode requires paths.occupancy".into())
                })?;
                (Some(PathBuf::from(cases)), Some(PathBuf::from(occ)))
            }
            RunMode::Synth => (
                raw.paths.cases.map(PathBuf::from),
                raw.paths.occupancy.map(PathBuf::from),
            ),
        };

        let split_fraction = raw.split.fraction.unwrap_or(0.75);
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split.fraction must be in (0,1), got {split_fraction}"
            )));
        }
        let alpha = raw.bounds.alpha.unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "bounds.alpha must be in (0,1), got {alpha}"
            )));
        }
        let rho_values = raw.policy.rho.clone().unwrap_or_default();
        for r in &rho_values {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::Config(format!("policy.rho entry {r} outside [0,1]")));
            }
        }

        let forest = IvForestParams {
            n_trees: raw.forest.trees.unwrap_or(2000),
            subsample_fraction: raw.forest.subsample_fraction.unwrap_or(0.5),
            honesty_fraction: raw.forest.honesty_fraction.unwrap_or(0.5),
            min_leaf: raw.forest.min_leaf.unwrap_or(5),
            mtry: raw.forest.mtry,
            denom_floor: raw.forest.denom_floor.unwrap_or(1e-3),
            folds: raw.forest.folds.unwrap_or(5),
            nuisance_trees: raw.forest.nuisance_trees.unwrap_or(100),
            seed: derive_seed(seed, "forest"),
        };

        let defaults = DgpSpec::default();
        let effect_fn = match &raw.synth.effect {
            Some(e) => effect_from_raw(e)?,
            None => defaults.effect_fn.clone(),
        };
        let compliance_mix = match &raw.synth.compliance {
            Some(c) => ComplianceMix {
                complier: c.complier,
                always_taker: c.always_taker,
                never_taker: c.never_taker,
                defier: c.defier.unwrap_or(0.0),
            },
            None => defaults.compliance_mix.clone(),
        };
        let dgp = DgpSpec {
            n_hospitals: raw.synth.n_hospitals.unwrap_or(defaults.n_hospitals),
            n_days: raw.synth.n_days.unwrap_or(defaults.n_days),
            start_day: match &raw.synth.start_day {
                Some(s) => s
                    .parse()
                    .map_err(|_| Error::Config(format!("bad synth.start_day '{s}'")))?,
                None => defaults.start_day,
            },
            patients_per_day_min: raw
                .synth
                .patients_per_day_min
                .unwrap_or(defaults.patients_per_day_min),
            patients_per_day_max: raw
                .synth
                .patients_per_day_max
                .unwrap_or(defaults.patients_per_day_max),
            effect_fn,
            baseline_fn: BaselineFn {
                intercept: raw
                    .synth
                    .baseline_intercept
                    .unwrap_or(defaults.baseline_fn.intercept),
                x_cont_coef: raw
                    .synth
                    .baseline_x_cont_coef
                    .unwrap_or(defaults.baseline_fn.x_cont_coef),
            },
            compliance_mix,
            instrument_prob: raw
                .synth
                .instrument_prob
                .unwrap_or(defaults.instrument_prob),
            confounding_strength: raw
                .synth
                .confounding_strength
                .unwrap_or(defaults.confounding_strength),
            capacity_intmed: raw
                .synth
                .capacity_intmed
                .unwrap_or(defaults.capacity_intmed),
            capacity_surg: raw.synth.capacity_surg.unwrap_or(defaults.capacity_surg),
            background_occupancy: raw
                .synth
                .background_occupancy
                .unwrap_or(defaults.background_occupancy),
            seed: derive_seed(seed, "synth"),
        };

        Ok(RunConfig {
            mode,
            seed,
            out_dir: PathBuf::from(raw.out_dir.unwrap_or_else(|| "out".to_string())),
            threads: raw.threads,
            cases_path,
            occupancy_path,
            schema,
            split_fraction,
            split_seed: raw.split.seed.unwrap_or_else(|| derive_seed(seed, "split")),
            forest,
            alpha,
            exact_threshold: raw.policy.exact_threshold.unwrap_or(22),
            rho_values,
            dgp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synth_config() {
        let cfg = RunConfig::from_toml_str(
            r#"
            mode = "synth"
            seed = 7
            [split]
            fraction = 0.75
            seed = 3
            [policy]
            exact_threshold = 12
            rho = [0.1, 0.2]
            [bounds]
            alpha = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, RunMode::Synth);
        assert_eq!(cfg.split_seed, 3);
        assert_eq!(cfg.exact_threshold, 12);
        assert_eq!(cfg.rho_values, vec![0.1, 0.2]);
    }

    #[test]
    fn ingest_requires_paths_and_schema() {
        let err = RunConfig::from_toml_str("mode = \"ingest\"").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_fraction_rejected() {
        let err = RunConfig::from_toml_str("[split]\nfraction = 1.0").unwrap_err();
        assert!(err.to_string().contains("fraction"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("nonsense = 1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn derive_seed_is_stable_and_stagewise() {
        assert_eq!(derive_seed(1, "forest"), derive_seed(1, "forest"));
        assert_ne!(derive_seed(1, "forest"), derive_seed(1, "split"));
        assert_ne!(derive_seed(1, "forest"), derive_seed(2, "forest"));
    }
}
