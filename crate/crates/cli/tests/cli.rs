use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gridlines(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridlines")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn construct_writes_set_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.json");
    let csv = dir.path().join("s.csv");
    let run = gridlines(&["construct", "--n", "24", "--k", "6", "--seed", "3", "--out", path_str(&out), "--csv", path_str(&csv)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let set = read_json(&out);
    assert_eq!(set["n"], 24);
    assert_eq!(set["d"], 2);
    let pts = set["points"].as_array().unwrap();
    assert_eq!(pts.len(), 144);
    let keys: Vec<(i64, i64)> = pts.iter().map(|p| (p[0].as_i64().unwrap(), p[1].as_i64().unwrap())).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    assert!(keys.iter().all(|&(x, y)| (1..=24).contains(&x) && (1..=24).contains(&y)));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 145);
    let manifest = read_json(&dir.path().join("s.json.manifest.json"));
    assert_eq!(manifest["command"], "construct");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["verdicts"]["exact_ok"], true);
    assert!(manifest["rng"].as_str().unwrap().contains("chacha"));
}

#[test]
fn same_seed_replays_identically() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(code(&gridlines(&["construct", "--n", "32", "--k", "8", "--seed", "9", "--out", path_str(p)])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let threads = Command::new(env!("CARGO_BIN_EXE_gridlines"))
        .args(["construct", "--n", "32", "--k", "8", "--seed", "9"])
        .env("GRIDLINES_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&threads), 0);
    assert_eq!(String::from_utf8(threads.stdout).unwrap().trim(), fs::read_to_string(&a).unwrap().trim());
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_gridlines"))
        .args(["profile", "--m", "10", "--m0", "1000"])
        .env("GRIDLINES_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&gridlines(&["construct", "--n", "10"])), 1);
    assert_eq!(code(&gridlines(&["construct", "--n", "10", "--k", "12"])), 1);
    assert_eq!(code(&gridlines(&["compose", "--n", "42", "--k", "10"])), 1);
    assert_eq!(code(&gridlines(&["verify", "--in", "/nonexistent/set.json", "--k", "2"])), 1);
    assert_eq!(code(&gridlines(&["frobnicate"])), 1);
    assert_eq!(code(&gridlines(&["--help"])), 0);
}

#[test]
fn exhausted_budget_exits_two() {
    let out = gridlines(&["construct", "--n", "64", "--k", "16", "--retries", "1", "--resample-budget", "1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_flags_collinear_points() {
    let dir = TempDir::new().unwrap();
    let diag = dir.path().join("diag.json");
    fs::write(&diag, r#"{"n":4,"d":2,"points":[[1,1],[2,2],[3,3],[4,4]]}"#).unwrap();
    let out = gridlines(&["verify", "--in", path_str(&diag), "--k", "3"]);
    assert_eq!(code(&out), 3);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["exact_ok"], false);
    assert_eq!(report["violations"][0]["count"], 4);
    assert_eq!(code(&gridlines(&["verify", "--in", path_str(&diag), "--k", "4"])), 0);

    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"n":5,"d":2,"points":[]}"#).unwrap();
    assert_eq!(code(&gridlines(&["verify", "--in", path_str(&empty), "--k", "2"])), 0);

    let dup = dir.path().join("dup.json");
    fs::write(&dup, r#"{"n":5,"d":2,"points":[[1,1],[1,1]]}"#).unwrap();
    assert_eq!(code(&gridlines(&["verify", "--in", path_str(&dup), "--k", "2"])), 1);
}

#[test]
fn render_is_deterministic_and_overlays_lines() {
    let dir = TempDir::new().unwrap();
    let set = dir.path().join("s.json");
    assert_eq!(code(&gridlines(&["construct", "--n", "16", "--k", "4", "--seed", "1", "--out", path_str(&set)])), 0);
    let render = |name: &str, overlay: &str| {
        let out = dir.path().join(name);
        let run = gridlines(&["render", "--in", path_str(&set), "--out", path_str(&out), "--overlay-lines", overlay]);
        assert_eq!(code(&run), 0);
        fs::read_to_string(out).unwrap()
    };
    let plain = render("a.svg", "0");
    assert_eq!(plain, render("b.svg", "0"));
    assert_eq!(plain.matches("<circle").count(), 64);
    let over = render("c.svg", "3");
    assert_eq!(over.matches("<line").count(), plain.matches("<line").count() + 3);
}

#[test]
fn compose_builds_a_regular_set() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let run = gridlines(&["compose", "--n", "40", "--k", "10", "--seed", "2", "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(read_json(&out)["points"].as_array().unwrap().len(), 400);
    assert_eq!(code(&gridlines(&["verify", "--in", path_str(&out), "--k", "20"])), 0);
}

#[test]
fn enumerate_and_profile_report_counts() {
    let out = gridlines(&["enumerate", "--n", "3", "--summary"]);
    assert_eq!(code(&out), 0);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    // Three rows, three columns, two diagonals.
    assert_eq!(summary["lines"], 8);
    let out = gridlines(&["profile", "--m", "1e36", "--m0", "1e108"]);
    assert_eq!(code(&out), 0);
    let d: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(d["ln_lll_product"].as_f64().unwrap() < 0.0);
    let out = gridlines(&["profile", "--n", "4", "--d", "3", "--t", "1"]);
    assert_eq!(code(&out), 0);
    let p: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p["tail_constant"], 7);
}
