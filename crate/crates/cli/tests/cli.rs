use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL_FOREST: &[&str] = &[
    "--trees", "60", "--base-trees", "15", "--final-trees", "60", "--nodesize-grid", "1,5", "--mtry-grid", "2,8",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iteforest"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &Path, n: usize) -> String {
    let data = path(dir, "d.csv");
    run(&["--seed", "5", "simulate", "--model", "m1", "--n", &n.to_string(), "--out", &data]);
    data
}

#[test]
fn estimate_writes_one_line_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 150);
    let tau = path(dir.path(), "tau.txt");
    let mut args = vec!["estimate", "--data", &data, "--method", "syncf", "--out", &tau];
    args.extend(SMALL_FOREST);
    run(&args);
    let text = fs::read_to_string(&tau).unwrap();
    assert_eq!(text.lines().count(), 150);
    assert!(text.lines().all(|l| l.parse::<f64>().unwrap().is_finite()));
    assert!(Path::new(&format!("{tau}.manifest")).exists());
}

#[test]
fn benchmark_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.cfg");
    fs::write(
        &cfg,
        "n = 100\nreplicates = 2\nstrata = 10\nmodels = m1,m2\nestimators = vt,cf\ntrees = 40\n",
    )
    .unwrap();
    let out = path(dir.path(), "bench");
    run(&["--config", cfg.to_str().unwrap(), "benchmark", "--out", &out]);
    let results = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 10);
    assert!(results.starts_with("model,estimator,stratum,bias,rmse,count,B_effective"));
    let manifest = fs::read_to_string(Path::new(&out).join("manifest.txt")).unwrap();
    assert!(manifest.contains("replicates = 2"));
    assert!(Path::new(&out).join("summary.csv").exists());
}

#[test]
fn unknown_inputs_fail_with_codes() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = bin().args(["simulate", "--nope", "1"]).output().unwrap();
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "simulate", "--out", "x.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[E_CONFIG]: "));

    let out = bin()
        .args(["estimate", "--data", &path(dir.path(), "missing.csv"), "--schema", cfg.to_str().unwrap(), "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[E_"));
}

#[test]
fn bad_treatment_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,t,y\n1,0,1\n2,2,1\n3,1,0\n").unwrap();
    fs::write(dir.path().join("bad.csv.schema"), "treatment = t\noutcome = y\ncovariate.a = numeric\n").unwrap();
    let out = bin()
        .args(["estimate", "--data", data.to_str().unwrap(), "--out", &path(dir.path(), "t.txt")])
        .output()
        .unwrap();
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[E_INGEST]"), "{err}");
    assert!(err.contains("row 2"));
}

#[test]
fn manifest_replay_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 120);
    let tau = path(dir.path(), "tau.txt");
    run(&["--seed", "9", "estimate", "--data", &data, "--method", "vti", "--trees", "50", "--out", &tau]);
    let manifest = format!("{tau}.manifest");
    let first = fs::read(&tau).unwrap();
    fs::remove_file(&tau).unwrap();
    run(&["--config", &manifest, "estimate"]);
    assert_eq!(first, fs::read(&tau).unwrap());
}

fn read_col(file: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn coplot_export_tracks_true_effect_slope() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 400);
    let tau = path(dir.path(), "tau.txt");
    run(&["estimate", "--data", &data, "--method", "cf", "--trees", "200", "--out", &tau]);
    let panel = PathBuf::from(path(dir.path(), "coplot.csv"));
    run(&[
        "coplot", "--data", &data, "--tau", &tau, "--x", "x1", "--panel", "x14", "--vertical", "x12", "--horizontal",
        "x13", "--out", panel.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&panel).unwrap();
    assert_eq!(text.lines().count(), 401);
    let strata: std::collections::BTreeSet<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].to_string())
        })
        .collect();
    assert_eq!(strata.len(), 4);
    let x = read_col(&panel, 6);
    let est = read_col(&panel, 7);
    let truth = read_col(Path::new(&format!("{data}.truth.csv")), 0);
    let c_est = corr(&x, &est);
    let c_true = corr(&x, &truth);
    assert!(c_true > 0.0 && c_est > 0.0, "est {c_est} true {c_true}");
}

#[test]
fn infer_writes_coefficient_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 500);
    let out = path(dir.path(), "coef.csv");
    run(&[
        "infer", "--data", &data, "--method", "cf", "--trees", "30", "--replicates", "20", "--fraction", "0.5",
        "--regressors", "x1,x2", "--out", &out,
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "term,estimate,std_error,z,significant");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("intercept"));
    assert!(lines[2].starts_with("x1,"));
}
