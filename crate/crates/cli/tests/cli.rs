use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use missreg::simulation::{generate, stream_rng, SyntheticModel};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_missreg"));
    c.env_remove("MISSREG_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

/// Writes a small incomplete dataset (`x0..x{p-1}`, `y`) and returns its path.
fn dataset(dir: &Path, n: usize, p: usize, rho: f64) -> PathBuf {
    let model = SyntheticModel::banded(p, 3, rho, 0.1, 7).unwrap();
    let s = generate(&model, n, &mut stream_rng(7, 1)).unwrap();
    let mut text: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    text.push("y".into());
    let mut out = text.join(",") + "\n";
    for i in 0..n {
        let mut row: Vec<String> = (0..p)
            .map(|j| {
                if s.design.mask()[[i, j]] == 1 {
                    format!("{:?}", s.x_full[[i, j]])
                } else {
                    "NA".into()
                }
            })
            .collect();
        row.push(format!("{:?}", s.y[i]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let path = dir.join("data.csv");
    fs::write(&path, out).unwrap();
    path
}

#[test]
fn fit_reports_beta_and_diagnostics() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), 150, 12, 0.8);
    let o = run(&["fit", "--input", data.to_str().unwrap(), "--response", "y", "--sigma-eps", "0.1"]);
    let v = stdout_json(&o);
    assert_eq!(v["beta"].as_array().unwrap().len(), 12);
    assert_eq!(v["names"][0], "x0");
    assert!(v["lambda_used"].as_f64().unwrap() > 0.0);
    assert_eq!(v["diagnostics"]["converged"], true);
    assert_eq!(v["meta"]["seed"], 42);
    assert_eq!(v["meta"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn ci_from_saved_fit_matches_end_to_end() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), 150, 12, 0.8);
    let d = data.to_str().unwrap();
    let beta_csv = dir.path().join("beta.csv");
    let fit = run(&["fit", "--input", d, "--response", "y", "--sigma-eps", "0.1", "--output", beta_csv.to_str().unwrap()]);
    let fit_json = dir.path().join("fit.json");
    fs::write(&fit_json, &fit.stdout).unwrap();

    let common = ["ci", "--format", "json", "--input", d, "--response", "y", "--sigma-eps", "0.1", "--coords", "0,3,11"];
    let direct = stdout_json(&run(&common));
    for from in [&beta_csv, &fit_json] {
        let mut args = common.to_vec();
        args.extend(["--beta-from", from.to_str().unwrap()]);
        let saved = stdout_json(&run(&args));
        let (a, b) = (direct["intervals"].as_array().unwrap(), saved["intervals"].as_array().unwrap());
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x["coord"], y["coord"]);
            for key in ["beta_debiased", "lower", "upper", "var"] {
                let (u, v) = (x[key].as_f64().unwrap(), y[key].as_f64().unwrap());
                assert!((u - v).abs() <= 1e-12, "{key}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn ci_defaults_to_csv_with_meta_comment() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), 120, 8, 0.9);
    let o = run(&["ci", "--input", data.to_str().unwrap(), "--response", "y", "--sigma-eps", "0.1", "--coords", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# missreg "));
    assert_eq!(lines[1], "coord,name,beta_hat,beta_debiased,lower,upper,var");
    assert_eq!(lines.len(), 3);
    let f: Vec<&str> = lines[2].split(',').collect();
    let (lo, hi): (f64, f64) = (f[4].parse().unwrap(), f[5].parse().unwrap());
    assert!(lo < hi);
}

#[test]
fn precision_writes_square_matrix() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), 200, 6, 0.9);
    let out = dir.path().join("theta.csv");
    let o = run(&[
        "precision",
        "--input",
        data.to_str().unwrap(),
        "--response",
        "y",
        "--nu",
        "0.2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = missreg::io::read_matrix_path(&out).unwrap();
    assert_eq!(m.dim(), (6, 6));
    assert!(m.diag().iter().all(|&v| v > 0.0));
}

#[test]
fn bad_input_exits_one_with_json_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,y\n1,2\nx,3\n").unwrap();
    let o = run(&["fit", "--input", path.to_str().unwrap(), "--response", "y", "--lambda", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["kind"], "input");

    // automatic λ without a noise level
    let data = dataset(dir.path(), 50, 4, 0.9);
    let o = run(&["fit", "--input", data.to_str().unwrap(), "--response", "y"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["fit", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kl_verify_constructions() {
    let v = stdout_json(&run(&["kl-verify", "--trials", "2000"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["equivalence"]["violations"], 0);
    assert!(v["kl_exact"].as_f64().unwrap() > 0.0);
    let slope = v["rho_scaling"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");

    let v = stdout_json(&run(&["kl-verify", "--construction", "identity", "--p", "6", "--trials", "20000"]));
    assert!(v["kl_exact"].as_f64().unwrap() <= v["kl_bound"].as_f64().unwrap());

    let v = stdout_json(&run(&["kl-verify", "--construction", "packing", "--p", "20", "--s", "4"]));
    assert_eq!(v["passed"], true);
    assert!(v["members"].as_u64().unwrap() >= 2);
}

#[test]
fn simulate_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n": 120, "p": 20, "s": 3, "rho": 0.9, "T": 3, "seed": 5, "tuning": {"tol": 1e-5}}"#,
    )
    .unwrap();
    let one = stdout_json(&run(&["simulate", "--config", cfg.to_str().unwrap(), "--workers", "1"]));
    let out = dir.path().join("out");
    let two = stdout_json(&run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--workers",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    let (mut one, mut two) = (one, two);
    // the worker count is recorded as provenance; everything else must match
    assert_eq!(one["report"][0]["settings"]["workers"].take(), 1);
    assert_eq!(two["report"][0]["settings"]["workers"].take(), 2);
    assert_eq!(one, two);
    assert_eq!(one["meta"]["seed"], 5);
    let rep = &one["report"][0];
    assert_eq!(rep["replications"], 3);
    assert_eq!(rep["avgcov"].as_array().unwrap().len(), 20);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("n,p,rho,"));
    assert!(table.lines().nth(2).unwrap().starts_with("120,20,0.9,"));
}

#[test]
fn simulate_rejects_unknown_config_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 10, "p": 5, "rho": 0.9, "T": 1, "bogus": 1}"#).unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
