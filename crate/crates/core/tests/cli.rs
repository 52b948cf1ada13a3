mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{gaussian_matrix, rng};
use rigidleak_core::harness::write_records_csv;
use serde_json::Value;

fn rigidleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidleak"))
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = rigidleak(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_csv(path: &Path, m: &nalgebra::DMatrix<f64>) {
    write_records_csv(m, std::fs::File::create(path).unwrap()).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn perturb_attack_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let private = dir.path().join("private.csv");
    let known = dir.path().join("known.csv");
    let released = dir.path().join("released.csv");
    let secret = dir.path().join("secret.json");
    let x = gaussian_matrix(4, 50, 2.0, &mut rng(1));
    write_csv(&private, &x);
    write_csv(&known, &x.columns(0, 4).into_owned());

    let out = rigidleak(&[
        "perturb",
        s(&private),
        "--seed",
        "9",
        "--output",
        s(&released),
        "--secret",
        s(&secret),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Four generic known records determine the map in four dimensions.
    let attack = ok_json(&[
        "attack",
        "known-input",
        "--known",
        s(&known),
        "--released",
        s(&released),
        "--epsilon",
        "0.05",
        "--seed",
        "3",
    ]);
    assert_eq!(attack["linked_inputs"].as_array().unwrap().len(), 4);
    assert_eq!(attack["rho"].as_f64(), Some(1.0));

    // The sample attack on a copy of the private data.
    let estimates = dir.path().join("estimates.csv");
    let sample = ok_json(&[
        "attack",
        "known-sample",
        "--sample",
        s(&private),
        "--released",
        s(&released),
        "--seed",
        "4",
        "--permutations",
        "19",
        "--output",
        s(&estimates),
    ]);
    assert_eq!(sample["signs"].as_array().unwrap().len(), 4);

    let eval = ok_json(&[
        "evaluate",
        "--truth",
        s(&private),
        "--estimates",
        s(&estimates),
        "--secret",
        s(&secret),
        "--epsilon",
        "10.0",
    ]);
    assert_eq!(eval["records"].as_u64(), Some(50));
    assert_eq!(eval["eps_breach_fraction"].as_f64(), Some(1.0));
}

#[test]
fn experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
seed = 0
repetitions = 4
epsilon = 0.3
[data]
kind = "random_gaussian"
dim = 5
records = 60
[attack]
kind = "known_input"
known_inputs = [2, 5]
"#,
    )
    .unwrap();
    let run = |seed: &str| {
        let out = rigidleak(&["experiment", "--config", s(&cfg), "--seed", seed]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let first = run("17");
    assert_eq!(first, run("17"));
    assert_ne!(first, run("18"));

    let report = dir.path().join("report.json");
    let out = rigidleak(&[
        "experiment",
        "--config",
        s(&cfg),
        "--seed",
        "17",
        "--format",
        "json",
        "--output",
        s(&report),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
}

#[test]
fn seed_is_required() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "1,2\n3,4\n").unwrap();
    let out = rigidleak(&[
        "perturb",
        s(&data),
        "--output",
        s(&dir.path().join("y.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "1,2\n3,x\n").unwrap();
    let out = rigidleak(&[
        "perturb",
        s(&data),
        "--seed",
        "1",
        "--output",
        s(&dir.path().join("y.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
