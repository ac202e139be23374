//! Process-level contract of the `qst` binary: exit codes, report shape,
//! error channels, tolerance resolution, and bit-identical fixture
//! round-trips.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Runs the binary with a scrubbed environment (no SELFTEST_TOL leakage).
fn qst(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qst"));
    cmd.args(args).env_remove("SELFTEST_TOL");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write_temp(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("qst-cli-{name}-{}", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn passing_run_exits_zero_with_a_full_report() {
    let out = qst(&["chsh", "score", &fixture("ideal_chsh.json")], &[]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["command"], "chsh score");
    assert_eq!(r["inputs"][0], Value::String(fixture("ideal_chsh.json")));
    assert_eq!(r["tolerance"], 1e-9);
    assert_eq!(r["seed"], 0);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["verdict"], "pass");
    assert!(r["elapsedMs"].as_f64().unwrap() >= 0.0);
    assert!(!r["items"].as_array().unwrap().is_empty());
    // every item carries a verdict, and any reported number is finite
    for item in r["items"].as_array().unwrap() {
        assert!(item["verdict"] == "pass" || item["verdict"] == "fail");
        for key in ["value", "residual", "cut"] {
            if !item[key].is_null() && item[key].is_number() {
                assert!(item[key].as_f64().unwrap().is_finite());
            }
        }
    }
}

#[test]
fn failing_verification_exits_one() {
    let out = qst(&["clifford", "ac-check", "--n", "2", "--independent"], &[]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    assert!(r["items"].as_array().unwrap().iter().any(|i| i["verdict"] == "fail"));
}

#[test]
fn invalid_model_is_a_failing_validation_item() {
    // Shrink the state to norm 0.99; `som validate` must report the 0.01
    // residual as a failing item, not an input error.
    let mut doc: Value =
        serde_json::from_slice(&std::fs::read(fixture("ideal_chsh.json")).unwrap()).unwrap();
    for entry in doc["state"].as_array_mut().unwrap() {
        for part in entry.as_array_mut().unwrap() {
            let v = part.as_f64().unwrap();
            *part = Value::from(v * 0.99);
        }
    }
    let path = write_temp("badnorm", &serde_json::to_string(&doc).unwrap());
    let out = qst(&["som", "validate", path.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    let state_item = r["items"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["name"] == "stateNorm")
        .expect("stateNorm item");
    let res = state_item["residual"].as_f64().unwrap();
    assert!((res - 0.01).abs() < 1e-12, "norm residual {res}");

    // The same file through a scoring verb is rejected as bad input.
    let out = qst(&["chsh", "score", path.to_str().unwrap()], &[]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("residual"), "stderr: {err}");
}

#[test]
fn missing_file_exits_two() {
    let out = qst(&["chsh", "score", "/nonexistent/model.json"], &[]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_json_exits_two() {
    let path = write_temp("malformed", "{ this is not json");
    let out = qst(&["chsh", "score", path.to_str().unwrap()], &[]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn schema_violations_name_the_offending_path() {
    let mut doc: Value =
        serde_json::from_slice(&std::fs::read(fixture("ideal_chsh.json")).unwrap()).unwrap();
    doc["alice"]["blocks"] = Value::from(5);
    let path = write_temp("badschema", &serde_json::to_string(&doc).unwrap());
    let out = qst(&["chsh", "score", path.to_str().unwrap()], &[]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("$.alice.blocks"), "stderr: {err}");
}

#[test]
fn unknown_commands_exit_two() {
    assert_eq!(code(&qst(&["frobnicate"], &[])), 2);
    assert_eq!(code(&qst(&["chsh", "bogus"], &[])), 2);
    assert_eq!(code(&qst(&[], &[])), 2);
}

#[test]
fn tolerance_resolution_follows_flag_env_default() {
    let out = qst(&["chsh", "counterexample"], &[("SELFTEST_TOL", "1e-3")]);
    assert_eq!(report(&out)["tolerance"], 1e-3);
    let out = qst(
        &["chsh", "counterexample", "--tol", "1e-6"],
        &[("SELFTEST_TOL", "1e-3")],
    );
    assert_eq!(report(&out)["tolerance"], 1e-6, "flag wins over the environment");
    let out = qst(&["chsh", "counterexample"], &[]);
    assert_eq!(report(&out)["tolerance"], 1e-9, "library default");
    // malformed or non-positive tolerances are input errors
    assert_eq!(code(&qst(&["chsh", "counterexample"], &[("SELFTEST_TOL", "abc")])), 2);
    assert_eq!(code(&qst(&["chsh", "counterexample", "--tol=-1"], &[])), 2);
    assert_eq!(code(&qst(&["chsh", "counterexample", "--tol", "0"], &[])), 2);
}

#[test]
fn seed_is_echoed_in_the_report() {
    let out = qst(&["chsh", "counterexample", "--seed", "7"], &[]);
    assert_eq!(report(&out)["seed"], 7);
}

#[test]
fn out_flag_writes_the_report_file() {
    let target = std::env::temp_dir().join(format!("qst-cli-out-{}.json", std::process::id()));
    let target_str = target.to_str().unwrap().to_string();
    let out = qst(
        &["chsh", "score", &fixture("ideal_chsh.json"), "--out", &target_str],
        &[],
    );
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty(), "report goes to the file, not stdout");
    let r: Value = serde_json::from_slice(&std::fs::read(&target).unwrap()).unwrap();
    assert_eq!(r["command"], "chsh score");
    std::fs::remove_file(&target).unwrap();
}

#[test]
fn reports_are_deterministic_up_to_timing() {
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("elapsedMs");
        v
    };
    let a = strip(report(&qst(&["chsh", "score", &fixture("ideal_chsh.json")], &[])));
    let b = strip(report(&qst(&["chsh", "score", &fixture("ideal_chsh.json")], &[])));
    assert_eq!(a, b);
    let a = strip(report(&qst(&["som", "dilate", &fixture("random_som.json")], &[])));
    let b = strip(report(&qst(&["som", "dilate", &fixture("random_som.json")], &[])));
    assert_eq!(a, b);
}

#[test]
fn fixture_round_trips_are_bit_identical() {
    for name in ["ideal_chsh.json", "random_som.json"] {
        let bytes = std::fs::read(fixture(name)).unwrap();
        let model = qst::cli::parse_model(&bytes).unwrap();
        let rendered =
            serde_json::to_string_pretty(&qst::cli::model_to_json(&model)).unwrap() + "\n";
        assert_eq!(
            rendered.as_bytes(),
            &bytes[..],
            "{name} must survive parse → render byte for byte"
        );
    }
}

#[test]
fn manifest_run_matches_the_binary() {
    let manifest = qst::cli::Manifest {
        command: "chsh score".into(),
        inputs: vec![PathBuf::from(fixture("ideal_chsh.json"))],
        tolerance: 1e-9,
        seed: 0,
        output_path: None,
    };
    let r = qst::cli::run(&manifest).unwrap();
    assert!(r.passed());
    let binary = report(&qst(&["chsh", "score", &fixture("ideal_chsh.json")], &[]));
    let lib = serde_json::to_value(&r).unwrap();
    assert_eq!(lib["items"], binary["items"]);
    assert_eq!(lib["command"], binary["command"]);
}
