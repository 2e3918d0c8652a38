use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = "\
n = 1
sigma = 1.5
F.kind = identity
g.kind = linear
phi.kind = smoothed_cone
grid.R = 4
grid.h = 0.05
";

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("problem.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nldeg"));
    cmd.arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest_paths(out: &Path) -> Vec<String> {
    let m = json(out.join("manifest.json"));
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn validate_shipped_config_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run("validate", &shipped("regression.cfg"), &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(out.join("validation.json"));
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert_eq!(manifest_paths(&out), ["validation.json"]);
}

#[test]
fn solve_regression_writes_one_row_per_node() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run("solve", &shipped("regression.cfg"), &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,u,phi,u_minus_phi,residual"));
    assert_eq!(lines.count(), 4001);
    let report = json(out.join("report.json"));
    assert!(report["final_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(
        std::fs::read_to_string(out.join("trace.csv")).unwrap(),
        "k,eps,gap,iters\n"
    );
}

#[test]
fn manifest_hashes_match_and_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("solve", &cfg, &a, &[], &[]).status.code(), Some(0));
    assert_eq!(
        run("solve", &cfg, &b, &[], &[("NLDEG_THREADS", "1")])
            .status
            .code(),
        Some(0)
    );
    let ma = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert_eq!(
        ma,
        std::fs::read_to_string(b.join("manifest.json")).unwrap()
    );
    // recompute one hash independently of the writer
    let m: Value = serde_json::from_str(&ma).unwrap();
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(a.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn unknown_key_exits_one_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &format!("{SMALL}grid.q = 3\n"));
    let o = run("solve", &cfg, &tmp.path().join("out"), &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains(":8:") && e.contains("grid.q"), "{e}");
}

#[test]
fn sigma_two_exits_one_citing_the_range() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &SMALL.replace("sigma = 1.5", "sigma = 2.0"));
    let o = run("validate", &cfg, &tmp.path().join("out"), &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(1,2)"), "{}", stderr(&o));
}

#[test]
fn failed_structural_condition_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &SMALL.replace("g.kind = linear", "g.kind = cubic"));
    let out = tmp.path().join("out");
    let o = run("validate", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(out.join("validation.json"));
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["passed"] == false && !c["witness"].is_null()));
}

#[test]
fn bad_environment_and_missing_file_exit_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let o = run(
        "validate",
        &cfg,
        &tmp.path().join("out"),
        &[],
        &[("NLDEG_THREADS", "many")],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        "validate",
        &tmp.path().join("absent.cfg"),
        &tmp.path().join("out"),
        &[],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        &format!("{SMALL}solver.method = relaxation\nsolver.max_iters = 2\n"),
    );
    let out = tmp.path().join("out");
    let o = run("solve", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn verify_passes_on_a_small_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &SMALL.replace("grid.h = 0.05", "grid.h = 0.02"));
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(out.join("verify_report.json"));
    assert_eq!(r["passed"], true);
    let mut files = manifest_paths(&out);
    files.sort();
    let expected = [
        "comparison.csv",
        "holder.csv",
        "oracle.csv",
        "quotients.csv",
        "report.json",
        "solution.csv",
        "trace.csv",
        "verify_report.json",
    ];
    assert_eq!(files, expected);
}

#[test]
fn coarse_oracle_exits_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        &SMALL
            .replace("grid.h = 0.05", "grid.h = 0.8")
            .replace("grid.R = 4", "grid.R = 8")
            .replace("sigma = 1.5", "sigma = 1.9"),
    );
    let out = tmp.path().join("out");
    let o = run("oracle", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("oracle.csv").exists());
}

#[test]
fn barriers_json_carries_the_certificate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let out = tmp.path().join("out");
    let o = run("barriers", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let b = json(out.join("barriers.json"));
    for key in [
        "kind",
        "M",
        "p_or_tau",
        "max_residual",
        "worst_node",
        "ray_fit",
    ] {
        assert!(b.get(key).is_some(), "missing {key}");
    }
    assert!(b["max_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn envelope_demo_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let out = tmp.path().join("out");
    let o = run("envelope-demo", &cfg, &out, &["--eps", "0.02"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("envelope.csv")).unwrap();
    assert!(csv.starts_with("x,u,sup_env,inf_env,argpoint_offset\n"));
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(v[3] <= v[1] && v[1] <= v[2]);
    }
    let o = run("envelope-demo", &cfg, &out, &["--eps=-1"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convergence_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let out = tmp.path().join("out");
    let o = run("convergence", &cfg, &out, &[], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
