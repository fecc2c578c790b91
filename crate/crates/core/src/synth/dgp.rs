//! Synthetic hospital data with known ground truth: compliance types,
//! busyness dynamics, and effect functions that estimation and policy layers
//! can be validated against.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    build_instrument, schema, CapacityLimits, CovariateSchema, DiagnosisGroup, HospitalId,
    OccupancyIndex, PatientCase, StayRecord, Unit,
};
use crate::error::{Error, Result};

/// Longest generated patient stay (days). Capacity validation leans on it.
const CASE_LOS_MAX: u64 = 3;

/// Default synthetic covariate layout: a binary effect modifier, a
/// continuous nuisance covariate, demographics, the emergency flag, and the
/// two busyness slots.
pub fn default_schema() -> CovariateSchema {
    CovariateSchema::new(vec![
        "x_bin".into(),
        "x_cont".into(),
        "age".into(),
        "sex".into(),
        "emergency".into(),
        schema::BUSY_INTMED_COL.into(),
        schema::BUSY_SURG_COL.into(),
    ])
    .expect("default schema")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EffectFn {
    /// tau(x) = value everywhere.
    Constant { value: f64 },
    /// tau(x) = intercept + slope * x[column].
    Linear {
        column: String,
        slope: f64,
        intercept: f64,
    },
    /// tau(x, b) = base(x) - gamma * (busy_intmed/C_intmed - busy_surg/C_surg):
    /// the benefit of internal-medicine placement deteriorates as that unit
    /// fills relative to the surgical unit.
    BusynessInteracted { base: Box<EffectFn>, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComplianceType {
    Complier,
    AlwaysTaker,
    NeverTaker,
    Defier,
}

impl ComplianceType {
    pub fn as_str(self) -> &'static str {
        match self {
            ComplianceType::Complier => "complier",
            ComplianceType::AlwaysTaker => "always_taker",
            ComplianceType::NeverTaker => "never_taker",
            ComplianceType::Defier => "defier",
        }
    }

    pub fn treatment(self, z: u8) -> u8 {
        match self {
            ComplianceType::Complier => z,
            ComplianceType::AlwaysTaker => 1,
            ComplianceType::NeverTaker => 0,
            ComplianceType::Defier => 1 - z,
        }
    }
}

/// Mixture over compliance behaviours; defaults to no defiers
/// (monotonicity).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceMix {
    pub complier: f64,
    pub always_taker: f64,
    pub never_taker: f64,
    pub defier: f64,
}

impl Default for ComplianceMix {
    fn default() -> Self {
        ComplianceMix {
            complier: 0.6,
            always_taker: 0.2,
            never_taker: 0.2,
            defier: 0.0,
        }
    }
}

impl ComplianceMix {
    pub fn perfect() -> Self {
        ComplianceMix {
            complier: 1.0,
            always_taker: 0.0,
            never_taker: 0.0,
            defier: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.complier, self.always_taker, self.never_taker, self.defier];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("compliance_mix entries must be in [0,1]".into()));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "compliance_mix sums to {total}, expected 1"
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, tilt: f64) -> ComplianceType {
        // `tilt` shifts mass toward always-takers and away from never-takers,
        // which is how unobserved risk becomes correlated with treatment.
        let mut at = self.always_taker * (1.0 + tilt).max(0.0);
        let mut nt = self.never_taker * (1.0 - tilt).max(0.0);
        let total = at + nt + self.complier + self.defier;
        at /= total;
        nt /= total;
        let co = self.complier / total;
        let u: f64 = rng.gen();
        if u < co {
            ComplianceType::Complier
        } else if u < co + at {
            ComplianceType::AlwaysTaker
        } else if u < co + at + nt {
            ComplianceType::NeverTaker
        } else {
            ComplianceType::Defier
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineFn {
    /// E[Y(0) | X] = intercept + x_cont_coef * x_cont (clipped into the unit interval).
    pub intercept: f64,
    pub x_cont_coef: f64,
}

impl Default for BaselineFn {
    fn default() -> Self {
        BaselineFn {
            intercept: 0.70,
            x_cont_coef: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n_hospitals: usize,
    pub n_days: usize,
    pub start_day: NaiveDate,
    pub patients_per_day_min: usize,
    pub patients_per_day_max: usize,
    pub effect_fn: EffectFn,
    pub baseline_fn: BaselineFn,
    pub compliance_mix: ComplianceMix,
    /// Target share of high-emergency days.
    pub instrument_prob: f64,
    /// Strength of the unobserved-risk correlation with treatment.
    pub confounding_strength: f64,
    /// Explicit per-unit capacities (same for every hospital-year here).
    pub capacity_intmed: u32,
    pub capacity_surg: u32,
    /// Target background occupancy the stay process hovers around.
    pub background_occupancy: u32,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n_hospitals: 2,
            n_days: 60,
            start_day: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            patients_per_day_min: 2,
            patients_per_day_max: 6,
            effect_fn: EffectFn::Linear {
                column: "x_bin".into(),
                slope: 0.2,
                intercept: 0.0,
            },
            baseline_fn: BaselineFn::default(),
            compliance_mix: ComplianceMix::default(),
            instrument_prob: 0.5,
            confounding_strength: 0.0,
            capacity_intmed: 30,
            capacity_surg: 30,
            background_occupancy: 10,
            seed: 7,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        self.compliance_mix.validate()?;
        if !(self.instrument_prob > 0.0 && self.instrument_prob < 1.0) {
            return Err(Error::Config("instrument_prob must be in (0,1)".into()));
        }
        if self.patients_per_day_min == 0 || self.patients_per_day_min > self.patients_per_day_max
        {
            return Err(Error::Config("invalid patients_per_day range".into()));
        }
        if self.n_days == 0 || self.n_hospitals == 0 || self.n_hospitals > 5 {
            return Err(Error::Config("n_days >= 1 and 1 <= n_hospitals <= 5 required".into()));
        }
        // Worst case in one unit: target background plus every active cohort
        // stay (up to CASE_LOS_MAX days of full cohorts).
        let margin = (CASE_LOS_MAX as u32) * self.patients_per_day_max as u32;
        if self.capacity_intmed < self.background_occupancy + margin
            || self.capacity_surg < self.background_occupancy + margin
        {
            return Err(Error::Config(format!(
                "capacities must be >= background_occupancy + {margin} to cover active cohort stays"
            )));
        }
        Ok(())
    }

    pub fn capacities(&self) -> CapacityLimits {
        let mut caps = CapacityLimits::new();
        let years = self.years();
        for h in 0..self.n_hospitals {
            for &year in &years {
                caps.set(hospital_name(h), year, Unit::IntMed, self.capacity_intmed);
                caps.set(hospital_name(h), year, Unit::Surgical, self.capacity_surg);
            }
        }
        caps
    }

    fn years(&self) -> Vec<i32> {
        let last = self.start_day + chrono::Days::new(self.n_days as u64 - 1);
        (self.start_day.year()..=last.year()).collect()
    }
}

pub fn hospital_name(index: usize) -> HospitalId {
    HospitalId(["A", "B", "C", "D", "E"][index].to_string())
}

/// Ground truth for every generated case. `tau0` is the covariate part of
/// the effect; the busyness-dependent part is re-evaluated on demand so
/// policy layers can score counterfactual occupancy levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub case_ids: Vec<String>,
    pub true_tau: Vec<f64>,
    pub compliance_type: Vec<ComplianceType>,
    tau0: Vec<f64>,
    gamma: f64,
    capacity_intmed: u32,
    capacity_surg: u32,
    /// Baseline survival probability per case (confounding included); the
    /// clipping of p0 + tau happens against it.
    p0: Vec<f64>,
}

impl GroundTruth {
    /// Baseline survival probability E[Y(0) | X, U] for case `idx`.
    pub fn baseline_survival(&self, idx: usize) -> f64 {
        self.p0[idx]
    }

    /// True effect for case `idx` if the units stood at the given busyness.
    pub fn tau_at_busyness(&self, idx: usize, busy_intmed: f64, busy_surg: f64) -> f64 {
        let raw = self.tau0[idx]
            - self.gamma
                * (busy_intmed / self.capacity_intmed as f64
                    - busy_surg / self.capacity_surg as f64);
        let p0 = self.p0[idx];
        (p0 + raw).clamp(0.0, 1.0) - p0
    }
}

fn effect_tau0(effect: &EffectFn, covariates: &[f64], sch: &CovariateSchema) -> Result<f64> {
    match effect {
        EffectFn::Constant { value } => Ok(*value),
        EffectFn::Linear {
            column,
            slope,
            intercept,
        } => {
            let idx = sch
                .columns()
                .iter()
                .position(|c| c == column)
                .ok_or_else(|| Error::Config(format!("effect column '{column}' not in schema")))?;
            Ok(intercept + slope * covariates[idx])
        }
        EffectFn::BusynessInteracted { base, .. } => effect_tau0(base, covariates, sch),
    }
}

fn effect_gamma(effect: &EffectFn) -> f64 {
    match effect {
        EffectFn::BusynessInteracted { gamma, .. } => *gamma,
        _ => 0.0,
    }
}

/// One generated dataset: cases (instrument already built), the full stay
/// list (background plus case stays), and ground truth aligned with `cases`.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub cases: Vec<PatientCase>,
    pub stays: Vec<StayRecord>,
    pub truth: GroundTruth,
    pub schema: CovariateSchema,
    pub capacities: CapacityLimits,
}

struct Skeleton {
    hospital: usize,
    day: NaiveDate,
    is_emergency: bool,
    x_bin: f64,
    x_cont: f64,
    age: f64,
    sex: f64,
    risk: f64,
    compliance: ComplianceType,
    diagnosis: DiagnosisGroup,
    los: u64,
}

/// Generates cases, occupancy and ground truth. Deterministic under the
/// spec seed. The stored per-case instrument is exactly what
/// `build_instrument` computes on the generated emergency counts, so the
/// instrument definition and the data agree on every case.
pub fn generate(spec: &DgpSpec) -> Result<SynthData> {
    spec.validate()?;
    let sch = default_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Day plan: cohort sizes and high/low emergency intent.
    let mut skeletons: Vec<Skeleton> = Vec::new();
    for h in 0..spec.n_hospitals {
        for d in 0..spec.n_days {
            let day = spec.start_day + chrono::Days::new(d as u64);
            let cohort = rng.gen_range(spec.patients_per_day_min..=spec.patients_per_day_max);
            let high_emergency = rng.gen_bool(spec.instrument_prob);
            // High-intent days get mostly-emergency cohorts, low days mostly
            // elective; the realized instrument is recomputed exactly below.
            let p_emergency = if high_emergency { 0.85 } else { 0.15 };
            for _ in 0..cohort {
                let risk: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                let tilt = spec.confounding_strength * risk;
                skeletons.push(Skeleton {
                    hospital: h,
                    day,
                    is_emergency: rng.gen_bool(p_emergency),
                    x_bin: f64::from(rng.gen_bool(0.5)),
                    x_cont: rng.gen::<f64>() * 2.0 - 1.0,
                    age: 40.0 + rng.gen::<f64>() * 50.0,
                    sex: f64::from(rng.gen_bool(0.5)),
                    risk,
                    compliance: spec.compliance_mix.draw(&mut rng, tilt),
                    diagnosis: DiagnosisGroup::ALL[rng.gen_range(0..DiagnosisGroup::ALL.len())],
                    los: rng.gen_range(1..=CASE_LOS_MAX),
                });
            }
        }
    }

    // Case shells (busyness slots filled later).
    let mut cases: Vec<PatientCase> = Vec::with_capacity(skeletons.len());
    for (i, sk) in skeletons.iter().enumerate() {
        let mut covariates = vec![0.0; sch.len()];
        covariates[0] = sk.x_bin;
        covariates[1] = sk.x_cont;
        covariates[2] = sk.age;
        covariates[3] = sk.sex;
        covariates[4] = f64::from(sk.is_emergency);
        cases.push(PatientCase {
            case_id: format!("S{i:06}"),
            hospital_id: hospital_name(sk.hospital),
            admit_day: sk.day,
            year: sk.day.year(),
            covariates,
            treatment: 0,
            instrument: None,
            outcome: 0,
            diagnosis_group: sk.diagnosis,
            is_emergency: sk.is_emergency,
        });
    }

    // Instrument from realized emergency counts, treatments from compliance.
    build_instrument(&mut cases)?;
    for (case, sk) in cases.iter_mut().zip(&skeletons) {
        let z = case.instrument.expect("instrument built");
        case.treatment = sk.compliance.treatment(z);
    }

    // Case stays in the assigned unit.
    let mut case_stays: Vec<StayRecord> = Vec::with_capacity(cases.len());
    for (case, sk) in cases.iter().zip(&skeletons) {
        case_stays.push(StayRecord {
            hospital_id: case.hospital_id.clone(),
            unit: Unit::from_treatment(case.treatment),
            admit_day: case.admit_day,
            discharge_day: case.admit_day + chrono::Days::new(sk.los - 1),
        });
    }

    // Case-stay occupancy per (hospital, unit, day), so the background
    // process can stay clear of capacity.
    let mut case_cover: BTreeMap<(usize, Unit, NaiveDate), u32> = BTreeMap::new();
    for (stay, sk) in case_stays.iter().zip(&skeletons) {
        let mut day = stay.admit_day;
        loop {
            *case_cover.entry((sk.hospital, stay.unit, day)).or_insert(0) += 1;
            if day == stay.discharge_day {
                break;
            }
            day = day.succ_opt().expect("date overflow");
        }
    }

    // Background stays: arrivals are throttled so background + case
    // occupancy never exceeds the background target, which the validated
    // capacities cover with a full-cohort margin.
    let mut stays: Vec<StayRecord> = Vec::new();
    for h in 0..spec.n_hospitals {
        for unit in [Unit::IntMed, Unit::Surgical] {
            let mut active: Vec<NaiveDate> = Vec::new(); // discharge days
            for d in 0..spec.n_days {
                let day = spec.start_day + chrono::Days::new(d as u64);
                active.retain(|&until| until >= day);
                let case_load = case_cover.get(&(h, unit, day)).copied().unwrap_or(0);
                let slack =
                    spec.background_occupancy as i64 - active.len() as i64 - case_load as i64;
                let arrivals = if slack <= 0 {
                    0
                } else {
                    rng.gen_range(0..=slack.min(4)) as usize
                };
                for _ in 0..arrivals {
                    let los = rng.gen_range(1..=5u64);
                    let discharge = day + chrono::Days::new(los - 1);
                    active.push(discharge);
                    stays.push(StayRecord {
                        hospital_id: hospital_name(h),
                        unit,
                        admit_day: day,
                        discharge_day: discharge,
                    });
                }
            }
        }
    }
    stays.extend(case_stays);
    let occupancy = OccupancyIndex::build(&stays)?;

    // Busyness covariates: pre-placement baseline (same-day admissions,
    // including the whole cohort, are excluded by the index).
    for case in cases.iter_mut() {
        let bi = occupancy.busyness(&case.hospital_id, Unit::IntMed, case.admit_day);
        let bs = occupancy.busyness(&case.hospital_id, Unit::Surgical, case.admit_day);
        sch.set_busyness(&mut case.covariates, bi as f64, bs as f64);
    }

    // Outcomes and ground truth.
    let gamma = effect_gamma(&spec.effect_fn);
    let n = cases.len();
    let mut true_tau = Vec::with_capacity(n);
    let mut tau0s = Vec::with_capacity(n);
    let mut p0s = Vec::with_capacity(n);
    let mut compliance_types = Vec::with_capacity(n);
    let mut case_ids = Vec::with_capacity(n);
    for (case, sk) in cases.iter_mut().zip(&skeletons) {
        let tau0 = effect_tau0(&spec.effect_fn, &case.covariates, &sch)?;
        let p0 = (spec.baseline_fn.intercept
            + spec.baseline_fn.x_cont_coef * sk.x_cont
            + spec.confounding_strength * 0.15 * sk.risk)
            .clamp(0.0, 1.0);
        let bi = case.covariates[sch.busy_intmed_idx()];
        let bs = case.covariates[sch.busy_surg_idx()];
        let raw_tau = tau0
            - gamma * (bi / spec.capacity_intmed as f64 - bs / spec.capacity_surg as f64);
        let p1 = (p0 + raw_tau).clamp(0.0, 1.0);
        let tau = p1 - p0;
        let p_outcome = if case.treatment == 1 { p1 } else { p0 };
        case.outcome = u8::from(rng.gen_bool(p_outcome));
        true_tau.push(tau);
        tau0s.push(tau0);
        p0s.push(p0);
        compliance_types.push(sk.compliance);
        case_ids.push(case.case_id.clone());
    }

    Ok(SynthData {
        cases,
        stays,
        truth: GroundTruth {
            case_ids,
            true_tau,
            compliance_type: compliance_types,
            tau0: tau0s,
            gamma,
            capacity_intmed: spec.capacity_intmed,
            capacity_surg: spec.capacity_surg,
            p0: p0s,
        },
        schema: sch,
        capacities: spec.capacities(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = DgpSpec::default();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.cases, b.cases);
        assert_eq!(a.stays, b.stays);
        assert_eq!(a.truth.true_tau, b.truth.true_tau);
    }

    #[test]
    fn perfect_compliance_means_w_equals_z() {
        let spec = DgpSpec {
            compliance_mix: ComplianceMix::perfect(),
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        for c in &data.cases {
            assert_eq!(c.treatment, c.instrument.unwrap());
        }
    }

    #[test]
    fn stored_instrument_matches_rebuild() {
        let data = generate(&DgpSpec::default()).unwrap();
        let mut rebuilt = data.cases.clone();
        for c in rebuilt.iter_mut() {
            c.instrument = None;
        }
        build_instrument(&mut rebuilt).unwrap();
        let agree = data
            .cases
            .iter()
            .zip(&rebuilt)
            .filter(|(a, b)| a.instrument == b.instrument)
            .count();
        assert_eq!(agree, data.cases.len());
    }

    #[test]
    fn null_effect_has_zero_ground_truth() {
        let spec = DgpSpec {
            effect_fn: EffectFn::Constant { value: 0.0 },
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        assert!(data.truth.true_tau.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn linear_effect_subgroup_means() {
        let spec = DgpSpec {
            effect_fn: EffectFn::Linear {
                column: "x_bin".into(),
                slope: 0.2,
                intercept: 0.0,
            },
            baseline_fn: BaselineFn {
                intercept: 0.6,
                x_cont_coef: 0.0,
            },
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        for (case, &tau) in data.cases.iter().zip(&data.truth.true_tau) {
            let expect = if case.covariates[0] > 0.5 { 0.2 } else { 0.0 };
            assert!((tau - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_matches_realized_busyness() {
        let spec = DgpSpec {
            effect_fn: EffectFn::BusynessInteracted {
                base: Box::new(EffectFn::Constant { value: 0.1 }),
                gamma: 0.3,
            },
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        let sch = &data.schema;
        for (i, case) in data.cases.iter().enumerate() {
            let bi = case.covariates[sch.busy_intmed_idx()];
            let bs = case.covariates[sch.busy_surg_idx()];
            let expect = data.truth.tau_at_busyness(i, bi, bs);
            assert!((data.truth.true_tau[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn occupancy_respects_capacities() {
        let spec = DgpSpec::default();
        let data = generate(&spec).unwrap();
        let idx = OccupancyIndex::build(&data.stays).unwrap();
        for h in 0..spec.n_hospitals {
            let hospital = hospital_name(h);
            for unit in [Unit::IntMed, Unit::Surgical] {
                let cap = if unit == Unit::IntMed {
                    spec.capacity_intmed
                } else {
                    spec.capacity_surg
                };
                for day in idx.days(&hospital, unit) {
                    assert!(
                        idx.occupancy(&hospital, unit, day) <= cap,
                        "{hospital}/{unit}/{day} over capacity"
                    );
                }
            }
        }
    }

    /// Null effect, no confounding, perfect compliance: the naive difference
    /// of survival means matches the potential-outcome gap up to binomial
    /// noise (within 3 standard errors).
    #[test]
    fn naive_difference_matches_truth_without_confounding() {
        let spec = DgpSpec {
            n_hospitals: 2,
            n_days: 230,
            patients_per_day_min: 8,
            patients_per_day_max: 14,
            effect_fn: EffectFn::Constant { value: 0.0 },
            compliance_mix: ComplianceMix::perfect(),
            confounding_strength: 0.0,
            capacity_intmed: 60,
            capacity_surg: 60,
            background_occupancy: 12,
            seed: 71,
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        assert!(data.cases.len() >= 5000);
        let (mut y1, mut y0, mut p1, mut p0) = (vec![], vec![], vec![], vec![]);
        for (i, case) in data.cases.iter().enumerate() {
            if case.treatment == 1 {
                y1.push(case.outcome as f64);
                p1.push(data.truth.baseline_survival(i));
            } else {
                y0.push(case.outcome as f64);
                p0.push(data.truth.baseline_survival(i));
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let gap = mean(&y1) - mean(&y0);
        let expected_gap = mean(&p1) - mean(&p0); // selection-free, tau = 0
        let se = (var(&y1) / y1.len() as f64 + var(&y0) / y0.len() as f64).sqrt();
        assert!(
            (gap - expected_gap).abs() <= 3.0 * se,
            "gap {gap} vs expected {expected_gap} (se {se})"
        );
    }

    /// Null effect with confounding: the naive difference tracks the
    /// selection-induced gap in baseline survival, not zero.
    #[test]
    fn naive_difference_matches_confounding_gap() {
        let spec = DgpSpec {
            n_hospitals: 2,
            n_days: 230,
            patients_per_day_min: 8,
            patients_per_day_max: 14,
            effect_fn: EffectFn::Constant { value: 0.0 },
            confounding_strength: 0.8,
            capacity_intmed: 60,
            capacity_surg: 60,
            background_occupancy: 12,
            seed: 72,
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        assert!(data.truth.true_tau.iter().all(|&t| t == 0.0));
        let (mut y1, mut y0, mut p1, mut p0) = (vec![], vec![], vec![], vec![]);
        for (i, case) in data.cases.iter().enumerate() {
            if case.treatment == 1 {
                y1.push(case.outcome as f64);
                p1.push(data.truth.baseline_survival(i));
            } else {
                y0.push(case.outcome as f64);
                p0.push(data.truth.baseline_survival(i));
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let gap = mean(&y1) - mean(&y0);
        let induced = mean(&p1) - mean(&p0);
        let se = (var(&y1) / y1.len() as f64 + var(&y0) / y0.len() as f64).sqrt();
        assert!((gap - induced).abs() <= 3.0 * se);
    }

    #[test]
    fn defiers_are_generatable() {
        let spec = DgpSpec {
            compliance_mix: ComplianceMix {
                complier: 0.5,
                always_taker: 0.15,
                never_taker: 0.15,
                defier: 0.2,
            },
            ..DgpSpec::default()
        };
        let data = generate(&spec).unwrap();
        let n_defiers = data
            .truth
            .compliance_type
            .iter()
            .filter(|&&t| t == ComplianceType::Defier)
            .count();
        assert!(n_defiers > 0);
        // defiers act against the instrument
        for (case, &t) in data.cases.iter().zip(&data.truth.compliance_type) {
            if t == ComplianceType::Defier {
                assert_eq!(case.treatment, 1 - case.instrument.unwrap());
            }
        }
    }

    #[test]
    fn invalid_probabilities_error() {
        let spec = DgpSpec {
            instrument_prob: 1.5,
            ..DgpSpec::default()
        };
        assert!(generate(&spec).is_err());
        let spec = DgpSpec {
            compliance_mix: ComplianceMix {
                complier: 0.9,
                always_taker: 0.9,
                never_taker: 0.0,
                defier: 0.0,
            },
            ..DgpSpec::default()
        };
        assert!(generate(&spec).is_err());
    }
}
