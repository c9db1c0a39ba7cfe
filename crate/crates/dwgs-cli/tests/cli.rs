//! End-to-end tests of the dwgs binary: exit codes, output shape,
//! determinism across worker counts.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dwgs"))
}

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

#[test]
fn spectrum_csv_shape_and_determinism() {
    let run = |workers: &str| {
        bin()
            .args([
                "spectrum",
                "--graph",
                &corpus("single_edge"),
                "--re-min",
                "-2",
                "--re-max",
                "0",
                "--im-min",
                "0",
                "--im-max",
                "20",
                "--workers",
                workers,
            ])
            .output()
            .unwrap()
    };
    let out1 = run("1");
    assert!(out1.status.success(), "{}", String::from_utf8_lossy(&out1.stderr));
    let text = String::from_utf8(out1.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "re,im,multiplicity,residual,rayleigh_residual"
    );
    // roots at -1 + i sqrt(k^2 pi^2 - 1), k = 1..6
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        let re: f64 = cols[0].parse().unwrap();
        assert!((re + 1.0).abs() < 1e-8);
        let rayleigh: f64 = cols[4].parse().unwrap();
        assert!(rayleigh < 1e-6);
    }
    let out2 = run("2");
    assert_eq!(out1.stdout, out2.stdout, "output differs across worker counts");
}

#[test]
fn abscissas_json_and_incommensurate_exit() {
    let out = bin()
        .args([
            "abscissas",
            "--graph",
            &corpus("k4"),
            "--cluster-tol",
            "1e-6",
            "--sweep",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_directed"], 12);
    assert_eq!(v["c0_unit"].as_array().unwrap().len(), 12);
    assert_eq!(v["orbit_method_ran"], true);
    assert_eq!(v["orbit_polynomial"].as_array().unwrap().len(), 13);
    assert!(v["method_deviation"].as_f64().unwrap() < 1e-9);
    let clusters = v["clusters"].as_array().unwrap();
    let total: u64 = clusters.iter().map(|c| c["m"].as_u64().unwrap()).sum();
    assert_eq!(total, 12);
    let sweep = v["cluster_sensitivity"].as_array().unwrap();
    assert_eq!(sweep.len(), 6);

    let out = bin()
        .args(["abscissas", "--graph", &corpus("star3_sqrt2")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("incommensurate"), "stderr: {err}");
}

#[test]
fn verify_exit_codes() {
    let out = bin()
        .args(["verify", "--graph", &corpus("ex72_loop_pendant")])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS dual-backend-zero-agreement"));
    assert!(text.contains("PASS rayleigh-identity"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn corrupted_coupling_rejected() {
    // non-unitary custom matrix must fail at load with a unitarity message
    let dir = std::env::temp_dir().join("dwgs-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corrupt.json");
    std::fs::write(
        &path,
        r#"{
            "vertices": ["a", "b"],
            "edges": [{"id": "e", "tail": "a", "head": "b", "length": 1.0,
                       "damping": {"type": "constant", "value": 1.0}}],
            "couplings": {
                "a": {"type": "custom", "matrix": [[{"re": 0.9, "im": 0.0}]]},
                "b": {"type": "dirichlet"}
            }
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["verify", "--graph", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not unitary"), "stderr: {err}");
}

#[test]
fn mu_table_with_prediction() {
    let out = bin()
        .args([
            "mu",
            "--graph",
            &corpus("single_edge"),
            "--i-min",
            "-1.2",
            "--i-max",
            "-0.8",
            "--r-periods",
            "3,5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("orbit prediction m_I/2N = 2/2"), "{text}");
    // every eigenvalue of the damped string has Re = -1, inside I
    assert!(text.contains("= 1/1 ="), "{text}");
}

#[test]
fn verify_json_format() {
    let out = bin()
        .args([
            "verify",
            "--graph",
            &corpus("single_edge"),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["all_passed"], true);
    assert!(v["items"].as_array().unwrap().len() >= 8);
}

#[test]
fn bad_method_and_empty_window_are_usage_errors() {
    let out = bin()
        .args([
            "spectrum", "--graph", &corpus("single_edge"), "--re-min", "0", "--re-max", "1",
            "--im-min", "0", "--im-max", "1", "--method", "bogus",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args([
            "spectrum", "--graph", &corpus("single_edge"), "--re-min", "1", "--re-max", "0",
            "--im-min", "0", "--im-max", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_graph_file_is_a_usage_error() {
    let out = bin()
        .args(["spectrum", "--graph", "/nonexistent.json", "--re-min", "0",
               "--re-max", "1", "--im-min", "0", "--im-max", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
