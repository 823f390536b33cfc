//! End-to-end tests of the `markovflow` binary: file formats, exit codes,
//! and stderr diagnostics.

use std::io::Write;
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_markovflow")
}

fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(format!("markovflow-cli-{}-{name}", std::process::id()));
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

#[test]
fn version_prints_package_version() {
    let out = Command::new(exe()).arg("version").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.trim(),
        format!("markovflow {}", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn vertices_counts_match_dimension() {
    let out = Command::new(exe())
        .args(["vertices", "--dim", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("vertex ").count(), 5);
}

#[test]
fn vertices_rejects_dim_one() {
    let out = Command::new(exe())
        .args(["vertices", "--dim", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bch_matches_library_closed_form() {
    let out = Command::new(exe())
        .args(["bch", "--dim", "2", "--x", "0.3,0.2", "--y", "0.1,0.4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("summatory: 1"), "output was:\n{text}");
    assert!(text.contains("exp-product residual"));
}

#[test]
fn embed_accepts_embeddable_equal_input_matrix() {
    // M_x with x = (0.2, 0.1): x = 0.3 < 1, nonnegative parameters
    let path = write_temp("embed-ok.txt", "2\n0.9 0.1\n0.2 0.8\n");
    let out = Command::new(exe())
        .arg("embed")
        .arg("--matrix")
        .arg(&path)
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "output:\n{text}");
    assert!(text.contains("equal-input: true"));
    assert!(text.contains("embeddable: true"));
    std::fs::remove_file(path).ok();
}

#[test]
fn embed_rejects_matrix_without_principal_generator_log() {
    // rows sum to 1 but the spectrum contains −0.1: no principal logarithm
    let path = write_temp("embed-neg.txt", "2\n0.45 0.55\n0.55 0.45\n");
    let out = Command::new(exe())
        .arg("embed")
        .arg("--matrix")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("principal log unavailable"),
        "output:\n{text}"
    );
    std::fs::remove_file(path).ok();
}

#[test]
fn embed_reports_malformed_file() {
    let path = write_temp("embed-bad.txt", "3\n1 0\n");
    let out = Command::new(exe())
        .arg("embed")
        .arg("--matrix")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(path).ok();
}

#[test]
fn solve_writes_reports_and_honours_exit_code() {
    let scenario = r#"{
        "name": "cli-solve",
        "dim": 2,
        "grid_points": 4,
        "family": {"kind": "equal_input", "q": [
            {"kind": "constant", "c": 0.2},
            {"kind": "constant", "c": 0.3}
        ]},
        "checks": ["ORACLE_RK", "STRUCTURE", "EMBEDDABILITY"]
    }"#;
    let scenario_path = write_temp("solve.json", scenario);
    let csv_path =
        std::env::temp_dir().join(format!("markovflow-cli-{}-out.csv", std::process::id()));
    let json_path =
        std::env::temp_dir().join(format!("markovflow-cli-{}-out.json", std::process::id()));
    let out = Command::new(exe())
        .arg("solve")
        .arg(&scenario_path)
        .arg("--out")
        .arg(&csv_path)
        .arg("--json")
        .arg(&json_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("t,m_0_0"));
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(json["scenario"], "cli-solve");
    assert_eq!(json["passed"], true);
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    for p in [scenario_path, csv_path, json_path] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn schema_errors_exit_two_with_path() {
    let path = write_temp(
        "bad-schema.json",
        r#"{"name": "x", "dim": 1, "family": {"kind": "equal_input", "q": []}}"#,
    );
    let out = Command::new(exe())
        .arg("verify")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dim"), "stderr was:\n{err}");
    std::fs::remove_file(path).ok();
}

#[test]
fn log_level_controls_stderr_diagnostics() {
    let scenario = r#"{
        "name": "cli-log",
        "dim": 2,
        "grid_points": 3,
        "family": {"kind": "equal_input", "q": [
            {"kind": "constant", "c": 0.1},
            {"kind": "constant", "c": 0.1}
        ]},
        "checks": ["STRUCTURE"]
    }"#;
    let path = write_temp("log.json", scenario);
    let quiet = Command::new(exe())
        .arg("verify")
        .arg(&path)
        .env("MARKOVFLOW_LOG", "error")
        .output()
        .unwrap();
    assert!(String::from_utf8(quiet.stderr).unwrap().is_empty());
    let chatty = Command::new(exe())
        .arg("verify")
        .arg(&path)
        .env("MARKOVFLOW_LOG", "info")
        .output()
        .unwrap();
    let err = String::from_utf8(chatty.stderr).unwrap();
    assert!(err.contains("closed-form flow"), "stderr was:\n{err}");
    std::fs::remove_file(path).ok();
}

#[test]
fn verify_fails_with_exit_one_when_check_fails() {
    // An equal-input family with a negative direction: the flow leaves the
    // Markov cone, so EMBEDDABILITY cannot hold... but a signed family is
    // not a rate family, which makes the check informational. Force a real
    // failure instead with an impossible oracle tolerance.
    let scenario = r#"{
        "name": "cli-fail",
        "dim": 2,
        "grid_points": 4,
        "tolerances": {"oracle_rtol": 1e-18},
        "family": {"kind": "equal_input", "q": [
            {"kind": "sinusoid", "a": 0.2, "omega": 1.0, "phi": 0.0, "offset": 0.4},
            {"kind": "constant", "c": 0.3}
        ]},
        "checks": ["ORACLE_RK"]
    }"#;
    let path = write_temp("fail.json", scenario);
    let out = Command::new(exe())
        .arg("verify")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL"), "output:\n{text}");
    std::fs::remove_file(path).ok();
}
