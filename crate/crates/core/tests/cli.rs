//! End-to-end runs of the `propcal` binary.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_propcal");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Variances (4, 2, 1) from unit `σ` and the ladder (4, 2, 1).
const CONFIG: &str = r#"
[model]
kind = "sequence"
sigma = [1.0, 1.0, 1.0, 1.0]
mu = [0.0, 0.0, 0.0, 0.0]
delta = 1.0
cutoffs = [4, 2, 1]

[calibration]
r = 0.5
alpha = 1.0
replications = 4000
seed = 5
"#;

#[test]
fn calibrate_select_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("model.toml");
    std::fs::write(&config, CONFIG).unwrap();

    let z_path = dir.path().join("z.csv");
    let out = run(&["calibrate", "--config", arg(&config), "--out", arg(&z_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&z_path).unwrap();
    assert!(text.contains("# replications=4000"));
    assert!(text.contains("k,z_k,achieved_risk_at_K,target"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);

    // fixed thresholds make the decision checkable by hand:
    // T_13 = (0 − 10)² / (2·4) = 12.5 > 3 rejects at step 3
    let manual = dir.path().join("manual.csv");
    std::fs::write(&manual, "k,z_k\n1,3\n2,3\n").unwrap();
    let est = dir.path().join("est.csv");
    std::fs::write(&est, "estimate\n0\n0\n10\n").unwrap();
    let out = run(&[
        "select",
        "--config",
        arg(&config),
        "--estimates",
        arg(&est),
        "--critical-values",
        arg(&manual),
    ]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "k_hat,theta_hat,rejected_l,rejected_k,t_lk\n2,0,1,3,12.5\n"
    );

    let out = run(&["diagnose", "--config", arg(&config), "--conditions"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("u0,2\n"));
    assert!(text.contains("md_ok,true\n"));

    let out = run(&[
        "diagnose",
        "--config",
        arg(&config),
        "--oracle",
        "--critical-values",
        arg(&z_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("k,v_k,bias_k,delta_k"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["calibrate", "--config", arg(&dir.path().join("missing.toml")), "--out", "z.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let config = dir.path().join("bad.toml");
    std::fs::write(&config, CONFIG.replace("cutoffs = [4, 2, 1]", "cutoffs = [2, 4, 1]")).unwrap();
    let out = run(&["diagnose", "--config", arg(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("decrease"));
}

#[test]
fn reproduce_table_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", "table2", "--n-reps", "2000", "--out", arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    // two rows of 14 thresholds plus the header
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 29);
    assert_eq!(stdout(&out), text);
}
