//! End-to-end tests of the `lse-cond` binary.

use std::path::Path;
use std::process::{Command, Output};

use lse_core::{
    gen_toeplitz_pair, read_matrix_market_vector, write_matrix_market,
    write_matrix_market_vector,
};
use nalgebra::{DMatrix, DVector};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lse-cond"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

/// The hand-checked fixture: A = I2, B = [1 0], b = (3, 4), d = (7).
fn identity_fixture(dir: &Path) {
    write_matrix_market(&dir.join("A.mtx"), &DMatrix::identity(2, 2)).unwrap();
    write_matrix_market(&dir.join("B.mtx"), &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
    write_matrix_market_vector(&dir.join("b.mtx"), &DVector::from_vec(vec![3.0, 4.0])).unwrap();
    write_matrix_market_vector(&dir.join("d.mtx"), &DVector::from_vec(vec![7.0])).unwrap();
}

#[test]
fn solve_writes_the_expected_solution() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--problem",
        dir.path().to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = read_matrix_market_vector(&out_dir.join("x.mtx")).unwrap();
    assert!((x[0] - 7.0).abs() < 1e-12 && (x[1] - 4.0).abs() < 1e-12);
    let r = read_matrix_market_vector(&out_dir.join("r.mtx")).unwrap();
    assert!((r[0] + 4.0).abs() < 1e-12 && r[1].abs() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["manifest"]["command"], "solve");
    assert!(summary["constraint_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn missing_file_exits_2_with_error_json() {
    let out = run(&["solve", "--problem", "/no/such/bundle", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn rank_deficient_constraint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    // overwrite B with a zero row
    write_matrix_market(&dir.path().join("B.mtx"), &DMatrix::from_row_slice(1, 2, &[0.0, 0.0]))
        .unwrap();
    let out = run(&[
        "solve",
        "--problem",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "assumptions");
}

#[test]
fn bad_flags_exit_5() {
    let out = run(&["cond", "--problem", "/tmp", "--method", "nonsense"]);
    assert_eq!(out.status.code(), Some(5));
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    let out = run(&[
        "cond",
        "--problem",
        dir.path().to_str().unwrap(),
        "--weights",
        "1,1,1",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "domain");
}

#[test]
fn cond_routes_agree_and_projector_flag_works() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    let problem = dir.path().to_str().unwrap().to_string();
    let kappa = |extra: &[&str]| -> f64 {
        let mut args = vec!["cond", "--problem", &problem];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        stdout_json(&out)["kappa"].as_f64().unwrap()
    };
    let closed = kappa(&["--method", "closed"]);
    let gsvd = kappa(&["--method", "gsvd"]);
    let kron = kappa(&["--method", "kron"]);
    assert!((closed - gsvd).abs() <= 1e-9 * closed);
    assert!((closed - kron).abs() <= 1e-9 * closed);
    // coordinate projector never exceeds the identity value
    let e1 = kappa(&["--method", "closed", "--l", "e1"]);
    assert!(e1 <= closed * (1.0 + 1e-12));
    // upper bound dominates
    let upper = kappa(&["--method", "upper"]);
    assert!(upper >= closed * (1.0 - 1e-12));
    // scaling all weights by 2 halves kappa
    let half = kappa(&["--method", "closed", "--weights", "2,2,2,2"]);
    assert!((half - closed / 2.0).abs() <= 1e-12 * closed);
}

#[test]
fn structured_command_runs_on_a_toeplitz_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let (p, _, _) = gen_toeplitz_pair(8, 1.0, 99).unwrap();
    write_matrix_market(&dir.path().join("A.mtx"), &p.a).unwrap();
    write_matrix_market(&dir.path().join("B.mtx"), &p.b).unwrap();
    write_matrix_market_vector(&dir.path().join("b.mtx"), &p.rhs).unwrap();
    write_matrix_market_vector(&dir.path().join("d.mtx"), &p.d).unwrap();
    let problem = dir.path().to_str().unwrap();

    let out = run(&[
        "structured",
        "--problem",
        problem,
        "--struct-a",
        "toeplitz",
        "--struct-b",
        "toeplitz",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let structured = stdout_json(&out)["kappa"].as_f64().unwrap();
    let out = run(&["cond", "--problem", problem, "--method", "gsvd"]);
    let unstructured = stdout_json(&out)["kappa"].as_f64().unwrap();
    assert!(structured <= unstructured * (1.0 + 1e-12));

    // a non-Toeplitz matrix is rejected with the structure error class
    let out = run(&[
        "structured",
        "--problem",
        problem,
        "--struct-a",
        "symmetric",
        "--struct-b",
        "toeplitz",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn estimate_is_deterministic_given_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    let problem = dir.path().to_str().unwrap();
    let args = [
        "estimate", "--problem", problem, "--method", "ssce", "--q", "2", "--seed", "17",
        "--exact",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report = stdout_json(&a);
    assert_eq!(report["manifest"]["seed"], 17);
    assert!(report["ratio"].as_f64().is_some());

    // pce with the reference parameters
    let out = run(&[
        "estimate", "--problem", problem, "--method", "pce", "--eps", "0.001", "--delta",
        "0.01", "--seed", "3", "--exact",
    ]);
    assert!(out.status.success());
    let rep = stdout_json(&out);
    let ratio = rep["ratio"].as_f64().unwrap();
    assert!((0.99..=1.01).contains(&ratio));
    assert_eq!(rep["converged"], true);
}

#[test]
fn estimate_without_seed_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    identity_fixture(dir.path());
    let out = run(&[
        "estimate",
        "--problem",
        dir.path().to_str().unwrap(),
        "--method",
        "ssce",
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed:"), "stderr was: {stderr}");
}

#[test]
fn bench_table1_emits_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bench",
        "--experiment",
        "table1",
        "--trials",
        "1",
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "l1,l2,rnorm,estimator,mean,variance");
    // 9 conditioning cells x 3 residual norms x 2 estimators
    assert_eq!(lines.len() - 1, 54);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 5);

    // same seed reproduces the file byte for byte
    let dir2 = tempfile::tempdir().unwrap();
    let out = run(&[
        "bench",
        "--experiment",
        "table1",
        "--trials",
        "1",
        "--seed",
        "5",
        "--out",
        dir2.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv2 = std::fs::read_to_string(dir2.path().join("table1.csv")).unwrap();
    assert_eq!(csv, csv2);
}

#[test]
fn bench_ratio_and_dimsweep_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bench",
        "--experiment",
        "ratio",
        "--n",
        "12",
        "--trials",
        "2",
        "--rnorms",
        "1e-2,1",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ratio_n12.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "trial,rnorm,ratio");
    assert_eq!(lines.len() - 1, 4);
    for line in &lines[1..] {
        let ratio: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ratio >= 1.0 - 1e-12);
    }

    let out = run(&[
        "bench",
        "--experiment",
        "dimsweep",
        "--sizes",
        "10,20",
        "--trials",
        "2",
        "--seed",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("dimsweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,mean,variance");
    assert_eq!(lines.len() - 1, 2);
}

#[test]
fn lls_bundle_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    // well-conditioned 4x2 least squares problem
    let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
    write_matrix_market(&dir.path().join("A.mtx"), &a).unwrap();
    write_matrix_market_vector(
        &dir.path().join("b.mtx"),
        &DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("problem.json"),
        r#"{"A": "A.mtx", "b": "b.mtx"}"#,
    )
    .unwrap();
    let manifest_path = dir.path().join("problem.json");
    let out = run(&[
        "cond",
        "--problem",
        manifest_path.to_str().unwrap(),
        "--method",
        "gsvd",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["method"], "lls_svd");
}
