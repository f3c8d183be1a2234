use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shapestat"));
    c.env("SHAPESTAT_THREADS", "1");
    c
}

fn write_normal(dir: &Path, name: &str, mean: f64, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, 1.0).unwrap();
    let text: String = (0..n).map(|_| format!("{}\n", d.sample(&mut rng))).collect();
    let p = dir.join(name);
    std::fs::write(&p, format!("value\n{text}")).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn data() -> (TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let x = write_normal(dir.path(), "x.txt", 0.0, 80, 1);
    let y = write_normal(dir.path(), "y.txt", 0.5, 90, 2);
    (dir, x.to_str().unwrap().to_owned(), y.to_str().unwrap().to_owned())
}

#[test]
fn density_grid_integrates_to_one() {
    let (_dir, x, _) = data();
    for fam in ["unimodal", "logconcave", "logconcave-smoothed", "kde"] {
        let doc = json_ok(&["density", "--x", &x, "--family", fam, "--grid", "4000"]);
        assert_eq!(doc["kind"], "density");
        assert_eq!(doc["schema_version"], 1);
        let grid = doc["grid"].as_array().unwrap();
        let pts: Vec<(f64, f64)> =
            grid.iter().map(|r| (r["x"].as_f64().unwrap(), r["pdf"].as_f64().unwrap())).collect();
        assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0), "{fam}: grid not sorted");
        let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        assert!((mass - 1.0).abs() < 1e-4, "{fam}: trapezoid mass {mass}");
        let last = grid.last().unwrap()["cdf"].as_f64().unwrap();
        assert!((last - 1.0).abs() < 1e-9, "{fam}: cdf at right end {last}");
    }
}

#[test]
fn density_empirical_has_null_pdf() {
    let (_dir, x, _) = data();
    let doc = json_ok(&["density", "--x", &x, "--family", "empirical", "--grid", "10"]);
    assert!(doc["grid"].as_array().unwrap().iter().all(|r| r["pdf"].is_null()));
    assert_eq!(doc["params"]["n"], 80);
}

#[test]
fn density_csv_has_header() {
    let (_dir, x, _) = data();
    let out = run(&["density", "--x", &x, "--family", "kde", "--grid", "5", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,pdf,cdf");
    assert_eq!(lines.count(), 5);
}

#[test]
fn dominance_document_fields() {
    let (_dir, x, y) = data();
    let doc = json_ok(&["dominance", "--x", &x, "--y", &y, "--stat", "tsep", "--family", "logconcave"]);
    for key in [
        "schema_version", "kind", "statistic", "value", "critical_value", "p_value", "reject", "p", "interval",
        "interval_degenerate", "family", "conservative", "c_mn", "lambda_hat", "asymptotics_unknown", "m", "n",
    ] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["kind"], "dominance");
    assert_eq!(doc["m"], 80);
    assert_eq!(doc["n"], 90);
    let p = doc["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let reject = doc["reject"].as_bool().unwrap();
    assert_eq!(reject, doc["value"].as_f64().unwrap() > doc["critical_value"].as_f64().unwrap());
}

#[test]
fn dominance_custom_interval() {
    let (_dir, x, y) = data();
    let doc = json_ok(&[
        "dominance", "--x", &x, "--y", &y, "--stat", "min-t", "--family", "empirical", "--interval", "-0.5,0.5",
    ]);
    let iv = doc["interval"].as_array().unwrap();
    assert_eq!(iv[0].as_f64(), Some(-0.5));
    assert_eq!(iv[1].as_f64(), Some(0.5));
}

#[test]
fn hellinger_document_fields() {
    let (_dir, x, y) = data();
    for est in ["logconcave-smoothed", "kde-bias-corrected"] {
        let doc = json_ok(&["hellinger", "--x", &x, "--y", &y, "--family", est]);
        assert_eq!(doc["kind"], "hellinger");
        let h2 = doc["h2"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&h2), "{est}: {h2}");
        let ci = doc["ci_h2"].as_array().unwrap();
        let (lo, hi) = (ci[0].as_f64().unwrap(), ci[1].as_f64().unwrap());
        assert!(lo <= hi && lo >= 0.0 && hi <= 1.0, "{est}: [{lo}, {hi}]");
    }
}

#[test]
fn output_flag_writes_file() {
    let (dir, x, _) = data();
    let target = dir.path().join("out.json");
    let out = run(&["density", "--x", &x, "--family", "logconcave", "--grid", "3", "-o", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(doc["family"], "logconcave");
}

#[test]
fn bad_input_exits_two() {
    let (dir, x, _) = data();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1.0\n2.0\nabc\n").unwrap();
    let out = run(&["density", "--x", bad.to_str().unwrap(), "--family", "kde"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "input");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 3"));

    let out = run(&["density", "--x", "/nonexistent/file", "--family", "kde"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["density", "--x", &x, "--family", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    let out = run(&["dominance", "--x", &x, "--y", &x, "--stat", "wrs", "--family", "empirical", "--conservative"]);
    assert_eq!(out.status.code(), Some(2));

    let out = bin().env("SHAPESTAT_THREADS", "many").args(["density", "--x", &x, "--family", "kde"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dominance"));
}

#[test]
fn simulate_power_small_run() {
    let doc = json_ok(&[
        "simulate", "power", "--case", "a", "--stat", "min-t,tsep", "--family", "empirical", "--reps", "20",
        "--gammas", "0,1", "--m", "30", "--n", "30",
    ]);
    assert_eq!(doc["kind"], "power");
    let curves = doc["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 2);
    for c in curves {
        let pts = c["points"].as_array().unwrap();
        assert_eq!(pts.len(), 2);
        for p in pts {
            let e = p["estimate"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
    }
}

#[test]
fn malformed_interval_is_usage_error() {
    let (_dir, x, y) = data();
    for iv in ["1", "1,0", "a,b", "0,inf"] {
        let out = run(&["dominance", "--x", &x, "--y", &y, "--stat", "min-t", "--family", "empirical", "--interval", iv]);
        assert_eq!(out.status.code(), Some(2), "{iv}");
        assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
    }
}
