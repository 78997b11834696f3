use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamburger")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("stderr line")).expect("stderr is JSON")
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let out = run(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn write_scalars(dir: &Path, name: &str, values: &[&str]) -> PathBuf {
    let moments: Vec<Value> = values.iter().map(|v| serde_json::json!([[[v, "0"]]])).collect();
    let path = dir.join(name);
    let doc = serde_json::json!({ "N": 1, "precision_bits": 53, "moments": moments });
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/two_atom.json")
}

#[test]
fn generate_matches_golden_two_atom() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "t.json", &["--family", "two-atom", "--count", "9"]);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(golden()).unwrap());
    let doc: Value = serde_json::from_slice(&std::fs::read(golden()).unwrap()).unwrap();
    let moments = doc["moments"].as_array().unwrap();
    assert_eq!(moments.len(), 9);
    for (k, m) in moments.iter().enumerate() {
        let expected = if k % 2 == 0 { "1" } else { "0" };
        assert_eq!(m[0][0][0].as_str().unwrap(), expected);
        assert_eq!(m[0][0][1].as_str().unwrap(), "0");
    }
}

#[test]
fn validate_accepts_and_rejects() {
    let out = run(&["validate", "--input", golden().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["verdict"]["status"], "solvable-within-tolerance");

    let dir = TempDir::new().unwrap();
    let bad = write_scalars(dir.path(), "bad.json", &["1", "0", "-1"]);
    let out = run(&["validate", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"]["status"], "rejected-at-order");
    assert_eq!(report["verdict"]["order"], 1);
}

#[test]
fn malformed_input_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_json(&out)["error"].is_string());
    let out = run(&["determinacy", "--input", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one() {
    let input = golden();
    let input = input.to_str().unwrap();
    let out = run(&["determinacy", "--input", input, "--max-section", "12"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stderr_json(&out)["error"], "usage");
    let out = run(&["determinacy", "--input", input, "--precision-bits", "32"]);
    assert_eq!(code(&out), 1);
    let out = run(&["transform", "--input", input, "--grid", "nonsense"]);
    assert_eq!(code(&out), 1);
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn zero_sequence_is_determinate() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "z.json", &["--family", "zero", "--count", "8"]);
    let out = run(&["determinacy", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "determinate");
    assert_eq!(report["reason"], "all-moments-zero");
}

#[test]
fn lognormal_is_indeterminate_and_gaussian_at_double_is_inconclusive() {
    let dir = TempDir::new().unwrap();
    let ln = generate(
        dir.path(),
        "l.json",
        &["--family", "lognormal", "--count", "140", "--precision-bits", "256"],
    );
    let out = run(&["determinacy", "--input", ln.to_str().unwrap(), "--max-section", "64"]);
    assert_eq!(code(&out), 3);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "indeterminate");
    assert_eq!(report["precision_bits"], 256);
    let r = report["side_a_residuals"][0].as_f64().unwrap();
    assert!((r - 0.408121).abs() < 1e-5, "{r}");

    let g = generate(dir.path(), "g.json", &["--family", "gaussian", "--count", "64"]);
    let out = run(&["determinacy", "--input", g.to_str().unwrap(), "--max-section", "64"]);
    assert_eq!(code(&out), 4);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "inconclusive");
    assert!(report["guidance"].as_str().unwrap().contains("precision"));
}

#[test]
fn coeffs_and_transform_on_lognormal() {
    let dir = TempDir::new().unwrap();
    let ln = generate(
        dir.path(),
        "l.json",
        &["--family", "lognormal", "--count", "140", "--precision-bits", "256"],
    );
    let input = ln.to_str().unwrap();
    let out = run(&["coeffs", "--input", input, "--max-section", "32", "--grid", "2i"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# section=32 A=1x1 B=1x1 C=1x1 D=1x1");
    assert!(lines.next().unwrap().starts_with("z_re,z_im,A00_re,A00_im"));
    assert_eq!(lines.count(), 1);

    let out = run(&["transform", "--input", input, "--grid", "2i,1+1i,-1+2i"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - 0.157708).abs() < 1e-5 && (row[3] - 0.305621).abs() < 1e-5, "{row:?}");
    let report = stderr_json(&out);
    assert!(report["section"].as_u64().unwrap() <= 128);

    let out = run(&["transform", "--input", input, "--grid", "0+1i"]);
    assert_eq!(code(&out), 5);
    assert_eq!(stderr_json(&out)["error"], "excluded-point");
}

#[test]
fn density_of_two_atoms_has_unit_mass() {
    let out = run(&[
        "density",
        "--input",
        golden().to_str().unwrap(),
        "--interval=-2,2",
        "--step",
        "1e-4",
        "--cumulative",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[1] - 1.0).abs() < 0.02, "{last:?}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a.json", &["--family", "random", "--block-size", "2", "--seed", "5"]);
    let b = generate(dir.path(), "b.json", &["--family", "random", "--block-size", "2", "--seed", "5"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let args = ["determinacy", "--input", a.to_str().unwrap()];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}
