//! Real-format CSV ingestion and the matching writers.
//!
//! Case file: header row with case_id, hospital_id, admit_day (ISO date),
//! year, w, z (optional; recomputed when absent), y, diagnosis_group,
//! is_emergency, then covariate columns in schema order. Occupancy file:
//! hospital_id, unit, admit_day, discharge_day.

use std::path::Path;

use crate::domain::{CovariateSchema, DiagnosisGroup, HospitalId, PatientCase, StayRecord, Unit};
use crate::error::{Error, Result};

const MAX_REPORTED_ERRORS: usize = 25;

#[derive(Debug)]
pub struct IngestedCases {
    pub cases: Vec<PatientCase>,
    /// Set when the z column was absent; `build_instrument` must run before
    /// estimation.
    pub needs_instrument: bool,
}

fn parse_binary(field: &str, name: &str, line: u64) -> std::result::Result<u8, String> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("line {line}: {name} must be 0 or 1, got '{other}'")),
    }
}

pub fn read_cases_csv(path: &Path, schema: &CovariateSchema) -> Result<IngestedCases> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let fixed = ["case_id", "hospital_id", "admit_day", "year", "w"];
    let mut errors: Vec<String> = Vec::new();

    let mut col: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        col.insert(h, i);
    }
    for name in fixed.iter().chain(["y", "diagnosis_group", "is_emergency"].iter()) {
        if !col.contains_key(name) {
            errors.push(format!("missing column '{name}'"));
        }
    }
    let has_z = col.contains_key("z");
    for c in schema.columns() {
        if !col.contains_key(c.as_str()) {
            errors.push(format!("missing covariate column '{c}'"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::DataItems(errors));
    }

    let idx = |name: &str| col[name];
    let mut cases = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if errors.len() >= MAX_REPORTED_ERRORS {
            errors.push("further errors suppressed".into());
            break;
        }
        let field = |name: &str| record.get(idx(name)).unwrap_or("").trim().to_string();

        let mut row_errors = Vec::new();
        let admit_day: Option<chrono::NaiveDate> = match field("admit_day").parse() {
            Ok(d) => Some(d),
            Err(_) => {
                row_errors.push(format!("line {line}: admit_day is not an ISO date"));
                None
            }
        };
        let year: Option<i32> = match field("year").parse() {
            Ok(y) => Some(y),
            Err(_) => {
                row_errors.push(format!("line {line}: year is not an integer"));
                None
            }
        };
        let w = parse_binary(&field("w"), "w", line).map_err(|e| row_errors.push(e)).ok();
        let y = parse_binary(&field("y"), "y", line).map_err(|e| row_errors.push(e)).ok();
        let z = if has_z {
            let raw = field("z");
            if raw.is_empty() {
                None
            } else {
                parse_binary(&raw, "z", line).map_err(|e| row_errors.push(e)).ok()
            }
        } else {
            None
        };
        let diagnosis = DiagnosisGroup::parse(&field("diagnosis_group"))
            .map_err(|_| {
                row_errors.push(format!(
                    "line {line}: unknown diagnosis_group '{}'",
                    field("diagnosis_group")
                ))
            })
            .ok();
        let is_emergency = parse_binary(&field("is_emergency"), "is_emergency", line)
            .map_err(|e| row_errors.push(e))
            .ok();
        let mut covariates = Vec::with_capacity(schema.len());
        for c in schema.columns() {
            match field(c).parse::<f64>() {
                Ok(v) => covariates.push(v),
                Err(_) => {
                    row_errors.push(format!("line {line}: covariate '{c}' is not numeric"));
                }
            }
        }

        if row_errors.is_empty() {
            cases.push(PatientCase {
                case_id: field("case_id"),
                hospital_id: HospitalId(field("hospital_id")),
                admit_day: admit_day.unwrap(),
                year: year.unwrap(),
                covariates,
                treatment: w.unwrap(),
                instrument: z,
                outcome: y.unwrap(),
                diagnosis_group: diagnosis.unwrap(),
                is_emergency: is_emergency.unwrap() == 1,
            });
        } else {
            errors.extend(row_errors);
        }
    }
    if !errors.is_empty() {
        return Err(Error::DataItems(errors));
    }
    let needs_instrument = !has_z || cases.iter().any(|c| c.instrument.is_none());
    Ok(IngestedCases {
        cases,
        needs_instrument,
    })
}

pub fn read_occupancy_csv(path: &Path) -> Result<Vec<StayRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expect = ["hospital_id", "unit", "admit_day", "discharge_day"];
    let mut col = std::collections::HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        col.insert(h.to_string(), i);
    }
    let mut errors = Vec::new();
    for name in expect {
        if !col.contains_key(name) {
            errors.push(format!("missing column '{name}'"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::DataItems(errors));
    }
    let mut stays = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &str| record.get(col[name]).unwrap_or("").trim().to_string();
        let parse_day = |name: &str| -> std::result::Result<chrono::NaiveDate, String> {
            field(name)
                .parse()
                .map_err(|_| format!("line {line}: {name} is not an ISO date"))
        };
        match (
            Unit::parse(&field("unit")),
            parse_day("admit_day"),
            parse_day("discharge_day"),
        ) {
            (Ok(unit), Ok(admit_day), Ok(discharge_day)) => {
                let stay = StayRecord {
                    hospital_id: HospitalId(field("hospital_id")),
                    unit,
                    admit_day,
                    discharge_day,
                };
                if let Err(e) = stay.validate() {
                    errors.push(format!("line {line}: {e}"));
                } else {
                    stays.push(stay);
                }
            }
            (unit, admit, discharge) => {
                if let Err(e) = unit {
                    errors.push(format!("line {line}: {e}"));
                }
                if let Err(e) = admit {
                    errors.push(e);
                }
                if let Err(e) = discharge {
                    errors.push(e);
                }
            }
        }
        if errors.len() >= MAX_REPORTED_ERRORS {
            errors.push("further errors suppressed".into());
            break;
        }
    }
    if !errors.is_empty() {
        return Err(Error::DataItems(errors));
    }
    Ok(stays)
}

pub fn write_cases_csv(path: &Path, cases: &[PatientCase], schema: &CovariateSchema) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "case_id".to_string(),
        "hospital_id".into(),
        "admit_day".into(),
        "year".into(),
        "w".into(),
        "z".into(),
        "y".into(),
        "diagnosis_group".into(),
        "is_emergency".into(),
    ];
    header.extend(schema.columns().iter().cloned());
    writer.write_record(&header)?;
    for c in cases {
        let mut row = vec![
            c.case_id.clone(),
            c.hospital_id.to_string(),
            c.admit_day.to_string(),
            c.year.to_string(),
            c.treatment.to_string(),
            c.instrument.map(|z| z.to_string()).unwrap_or_default(),
            c.outcome.to_string(),
            c.diagnosis_group.to_string(),
            u8::from(c.is_emergency).to_string(),
        ];
        row.extend(c.covariates.iter().map(|v| format!("{v}")));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_occupancy_csv(path: &Path, stays: &[StayRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["hospital_id", "unit", "admit_day", "discharge_day"])?;
    for s in stays {
        writer.write_record([
            s.hospital_id.to_string(),
            s.unit.to_string(),
            s.admit_day.to_string(),
            s.discharge_day.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_ground_truth_csv(
    path: &Path,
    truth: &crate::synth::dgp::GroundTruth,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["case_id", "true_tau", "compliance_type"])?;
    for i in 0..truth.case_ids.len() {
        writer.write_record([
            truth.case_ids[i].clone(),
            format!("{}", truth.true_tau[i]),
            truth.compliance_type[i].as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::dgp::{default_schema, generate, DgpSpec};

    #[test]
    fn roundtrip_preserves_rows() {
        let data = generate(&DgpSpec {
            n_days: 5,
            ..DgpSpec::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cases.csv");
        write_cases_csv(&path, &data.cases, &data.schema).unwrap();
        let back = read_cases_csv(&path, &data.schema).unwrap();
        assert_eq!(back.cases.len(), data.cases.len());
        assert!(!back.needs_instrument);
        assert_eq!(back.cases[0].case_id, data.cases[0].case_id);
    }

    #[test]
    fn bad_outcome_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let schema = default_schema();
        let mut content = String::from(
            "case_id,hospital_id,admit_day,year,w,z,y,diagnosis_group,is_emergency,x_bin,x_cont,age,sex,emergency,busy_intmed,busy_surg\n",
        );
        for i in 0..6 {
            let y = if i == 5 { 2 } else { 1 }; // line 7 in the file
            content.push_str(&format!(
                "c{i},A,2015-01-0{},2015,1,0,{y},I2,0,0,0,50,1,0,3,4\n",
                i + 1
            ));
        }
        std::fs::write(&path, content).unwrap();
        let err = read_cases_csv(&path, &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 7"), "{msg}");
        assert!(msg.contains("y must be 0 or 1"), "{msg}");
    }

    #[test]
    fn missing_z_column_flags_instrument() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noz.csv");
        let schema = default_schema();
        let content = "case_id,hospital_id,admit_day,year,w,y,diagnosis_group,is_emergency,x_bin,x_cont,age,sex,emergency,busy_intmed,busy_surg\n\
             c0,A,2015-01-01,2015,1,1,I2,0,0,0,50,1,0,3,4\n";
        std::fs::write(&path, content).unwrap();
        let got = read_cases_csv(&path, &schema).unwrap();
        assert!(got.needs_instrument);
        assert_eq!(got.cases[0].instrument, None);
    }

    #[test]
    fn occupancy_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("occ.csv");
        let stays = vec![StayRecord {
            hospital_id: "A".into(),
            unit: Unit::IntMed,
            admit_day: "2015-01-01".parse().unwrap(),
            discharge_day: "2015-01-04".parse().unwrap(),
        }];
        write_occupancy_csv(&path, &stays).unwrap();
        assert_eq!(read_occupancy_csv(&path).unwrap(), stays);
    }
}
