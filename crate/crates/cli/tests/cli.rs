use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fellcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fellcheck")).args(args).output().expect("fellcheck runs")
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(scenario: &Path, command: &str, dir: &Path) -> (i32, Value) {
    let out = dir.join("report.json");
    let o = fellcheck(&[
        "run",
        scenario.to_str().unwrap(),
        "--command",
        command,
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    (o.status.code().unwrap(), report)
}

fn gen(dir: &Path, file: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(file);
    let mut all = vec!["gen", "--out", path.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = fellcheck(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn bundled_p2_swap_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&bundled("p2_swap.json"), "verify-theorem", dir.path());
    assert_eq!(code, 0, "{report:#}");
    assert_eq!(report["report_v"], 1);
    let certs = report["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 4);
    assert!(certs.iter().all(|c| c["passed"] == true));
}

#[test]
fn zero_weight_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(bundled("p2_swap.json")).unwrap()).unwrap();
    file["haar"]["weights"][3] = Value::String("0".into());
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
    let (code, report) = run(&path, "validate", dir.path());
    assert_eq!(code, 1);
    assert!(report["error"]["message"].as_str().unwrap().contains("positivity violated at haar.weights[3]"));
}

#[test]
fn generated_z3_scenario_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "s.json", &["--seed", "42", "--units", "4", "--group", "z3"]);
    let (code, report) = run(&path, "verify-theorem", dir.path());
    assert_eq!(code, 0, "{report:#}");
}

#[test]
fn generated_seed_7_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "s.json", &["--seed", "7", "--units", "3", "--group", "z3"]);
    let (code, report) = run(&path, "validate", dir.path());
    assert_eq!(code, 0, "{report:#}");
}

#[test]
fn generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &["--seed", "11"]);
    let b = gen(dir.path(), "b.json", &["--seed", "11"]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn default_generation_is_the_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &[]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(bundled("p2_swap.json")).unwrap());
}

#[test]
fn infeasible_generation_fails() {
    let o = fellcheck(&["gen", "--seed", "1", "--units", "3", "--group", "p2"]);
    assert!(!o.status.success());
}

#[test]
fn build_writes_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&bundled("p2_swap.json"), "build", dir.path());
    assert_eq!(code, 0);
    assert_eq!(report["dumps"]["crossed_product_algebra"]["dim"], 8);
}
