use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn mlsmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlsmc"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> Output {
    let out = mlsmc(args);
    assert!(
        out.status.success(),
        "expected success from {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_study_into(dir: &Path, extra: &[&str]) -> Output {
    let config = data("finite_smoke.toml");
    let mut args = vec!["run-study", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run_ok(&args)
}

const HEADER: &str = "method,epsilon,replicate,seed,estimate,truth,rel_error,analytic_cost,wall_clock_s";

#[test]
fn study_csv_is_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_study_into(a.path(), &["--workers", "1"]);
    run_study_into(b.path(), &["--workers", "8"]);

    let csv_a = std::fs::read(a.path().join("study.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("study.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "worker count changed the CSV bytes");

    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    // 3 methods x 3 epsilons x 10 replicates.
    assert_eq!(lines.count(), 90);

    // A different seed must actually change the rows.
    let c = tempfile::tempdir().unwrap();
    run_study_into(c.path(), &["--workers", "1", "--seed", "8"]);
    let csv_c = std::fs::read(c.path().join("study.csv")).unwrap();
    assert_ne!(csv_b, csv_c, "seed override had no effect");
}

#[test]
fn study_sidecar_reports_the_exact_truth() {
    let dir = tempfile::tempdir().unwrap();
    run_study_into(dir.path(), &[]);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("study.json")).unwrap()).unwrap();

    assert_eq!(json["truth"]["exact"], serde_json::Value::Bool(true));
    let truth = json["truth"]["value"].as_f64().unwrap();
    // Enumerated Z_3/Z_0 of the four-level fixture.
    assert!((truth - 1.1405962).abs() < 1e-9, "truth {truth}");
    assert_eq!(json["truth"]["standard_error"], serde_json::Value::Null);
    assert_eq!(json["degenerate_rows"], 0);
    assert_eq!(json["total_rows"], 90);
    assert_eq!(json["replicates"], 10);
    let sha = json["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(json["methods"].as_array().unwrap().len(), 3);
    for method in json["methods"].as_array().unwrap() {
        for point in method["points"].as_array().unwrap() {
            assert!(point["median_cost"].as_f64().unwrap() > 0.0);
            assert!(point["mse"].as_f64().unwrap().is_finite());
        }
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    let original = std::fs::read_to_string(data("finite_smoke.toml")).unwrap();
    std::fs::write(&path, original.replace("sample-scale = 50.0", "sample-scala = 50.0")).unwrap();

    let out = mlsmc(&["run-study", path.to_str().unwrap()]);
    assert!(!out.status.success(), "typoed config was accepted");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sample-scala"), "stderr does not name the bad key: {stderr}");
}

#[test]
fn oracle_self_checks_all_pass() {
    let out = run_ok(&["check-oracle"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 5);
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]")), "{stdout}");
}

#[test]
fn reference_truth_short_circuits_to_the_enumerated_ratio() {
    let config = data("finite_smoke.toml");
    let out = run_ok(&["reference-truth", config.to_str().unwrap()]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["exact"], serde_json::Value::Bool(true));
    assert!((json["value"].as_f64().unwrap() - 1.1405962).abs() < 1e-9);
    assert_eq!(json["level"], 3);
}

#[test]
fn variance_rate_writes_a_usable_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = data("finite_smoke.toml");
    run_ok(&["variance-rate", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("variance_rate.json")).unwrap())
            .unwrap();
    assert!(json["beta_hat"].as_f64().unwrap().is_finite());
    let levels = json["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert!(levels.iter().all(|l| l["usable"] == serde_json::Value::Bool(true)));
}
