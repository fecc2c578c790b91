//! CLI surface: subcommand flows and exit codes (0 ok, 2 config, 3 data).

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wardopt"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        format!(
            r#"
            mode = "synth"
            seed = 11
            out_dir = "{}"
            [synth]
            n_hospitals = 1
            n_days = 18
            patients_per_day_min = 2
            patients_per_day_max = 5
            [forest]
            trees = 40
            nuisance_trees = 20
            folds = 3
            [policy]
            rho = [0.2]
            "#,
            dir.join("out").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn synth_fit_bounds_policy_flow() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let status = bin()
        .args(["--config", config.to_str().unwrap(), "synth"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("out/cases.csv").exists());
    assert!(dir.path().join("out/occupancy.csv").exists());
    assert!(dir.path().join("out/ground_truth.csv").exists());

    let status = bin()
        .args([
            "--config",
            config.to_str().unwrap(),
            "fit",
            "--trees",
            "30",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let forest = dir.path().join("out/forest.json");
    assert!(forest.exists());

    let status = bin()
        .args([
            "--config",
            config.to_str().unwrap(),
            "bounds",
            "--forest",
            forest.to_str().unwrap(),
            "--alpha",
            "0.05",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("out/bounds_per_case.csv").exists());
    assert!(dir.path().join("out/bounds_summary.csv").exists());

    let status = bin()
        .args([
            "--config",
            config.to_str().unwrap(),
            "policy",
            "--forest",
            forest.to_str().unwrap(),
            "--rho",
            "0.1",
            "--rho",
            "0.2",
            "--exact-threshold",
            "12",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let days = std::fs::read_to_string(dir.path().join("out/policy_days.csv")).unwrap();
    assert!(days.lines().count() > 1);
    assert!(days.contains("welfare_max"));

    let status = bin()
        .args(["--config", config.to_str().unwrap(), "run"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"underwater\"\n").unwrap();
    let status = bin()
        .args(["--config", bad.to_str().unwrap(), "synth"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases.csv");
    std::fs::write(
        &cases,
        "case_id,hospital_id,admit_day,year,w,y,diagnosis_group,is_emergency,busy_intmed,busy_surg\n\
         c0,A,2015-01-01,2015,1,2,I2,0,0,0\n",
    )
    .unwrap();
    let occ = dir.path().join("occ.csv");
    std::fs::write(&occ, "hospital_id,unit,admit_day,discharge_day\n").unwrap();
    let config = dir.path().join("ingest.toml");
    std::fs::write(
        &config,
        format!(
            r#"
            mode = "ingest"
            out_dir = "{}"
            [paths]
            cases = "{}"
            occupancy = "{}"
            [schema]
            columns = ["busy_intmed", "busy_surg"]
            "#,
            dir.path().join("out").display(),
            cases.display(),
            occ.display()
        ),
    )
    .unwrap();
    let output = bin()
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("ingest"), "stderr: {stderr}");
}

#[test]
fn seed_override_changes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    for (seed, out) in [("33", "a"), ("33", "b"), ("44", "c")] {
        let status = bin()
            .args([
                "--config",
                config.to_str().unwrap(),
                "--seed",
                seed,
                "--out-dir",
                dir.path().join(out).to_str().unwrap(),
                "synth",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let read = |name: &str| std::fs::read(dir.path().join(name).join("cases.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}
