use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
lambda_d = 1.0
creation = { kind = "constant", gamma = 1.0 }

[truncation]
modes = 2
max_degree = 10

[times]
values = [0.5, 1.0]

[mc]
replicas = 2000
master_seed = 3
"#;

fn cdme(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cdme"));
    cmd.args(args).env_remove("CDME_OUTPUT_DIR");
    if let Some(p) = env_out {
        cmd.env("CDME_OUTPUT_DIR", p);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_hierarchy_honours_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("from-env");
    let out = cdme(&["solve-hierarchy", "--config", &cfg], Some(&out_dir));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "number_law.csv",
        "state_final.json",
        "generator.coo",
        "manifest.json",
    ] {
        assert!(out_dir.join("hierarchy").join(f).exists(), "{f}");
    }
    let snap: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("hierarchy/state_final.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snap["enumeration"], "grlex");
    assert_eq!(snap["N"], 2);
    assert_eq!(snap["M"], 10);
}

#[test]
fn flag_beats_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let flag_s = flag.to_str().unwrap();
    let out = cdme(
        &["solve-cme", "--config", &cfg, "--output-dir", flag_s],
        Some(&env),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(flag.join("cme/cme_number_law.csv").exists());
    assert!(!env.exists());
}

#[test]
fn invalid_config_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("lambda_d = 1.0", "lambda_d = -1.0"),
    );
    let out = cdme(&["solve-hierarchy", "--config", &cfg], Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.lambda_d"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn compare_passes_then_fails_under_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let root = dir.path().join("out");
    let root_s = root.to_str().unwrap();

    let ok = cdme(&["compare", "--config", &cfg, "--output-dir", root_s], None);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("compare/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["all_pass"], true);

    let bad = cdme(
        &[
            "compare",
            "--config",
            &cfg,
            "--output-dir",
            root_s,
            "--perturb-entry",
            "0,1,1e-3",
        ],
        None,
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn tightened_tolerance_fails_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let root = dir.path().join("out");
    let out = cdme(
        &[
            "compare",
            "--config",
            &cfg,
            "--output-dir",
            root.to_str().unwrap(),
            "--tol",
            "mc_number_law=0",
        ],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn transfer_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cdme(&["transfer-check"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("transfer/manifest.json").exists());
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{CONFIG}\n[extra]\nx = 1\n"));
    let out = cdme(&["solve-cme", "--config", &cfg], Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
}
