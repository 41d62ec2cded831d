use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apesmc::scenario::ScenarioConfig;
use apesmc_bench::aggregate;
use apesmc_bench::output::read_raw;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apesmc")).args(args).output().expect("binary runs")
}

/// Writes the stock scenario cut to `horizon` steps and returns its path.
fn short_scenario(dir: &Path, horizon: usize) -> PathBuf {
    let full = dir.join("reference.json");
    assert!(cli(&["scenario", "emit-reference", "--out", full.to_str().unwrap()]).status.success());
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&full).unwrap()).unwrap();
    v["horizon"] = horizon.into();
    let schedule = v["omega_schedule_deg"].as_array().unwrap().clone();
    v["omega_schedule_deg"] =
        schedule.into_iter().filter(|s| s["start"].as_u64().unwrap() as usize <= horizon).collect();
    let path = dir.join(format!("short{horizon}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn run_args<'a>(cfg: &'a str, out: &'a str, filter: &'a str) -> Vec<&'a str> {
    vec!["run", "--config", cfg, "--out", out, "--filter", filter, "--particles", "200", "--runs", "3", "--seed", "7"]
}

#[test]
fn emitted_scenario_loads() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("reference.json");
    assert!(cli(&["scenario", "emit-reference", "--out", path.to_str().unwrap()]).status.success());
    let cfg = ScenarioConfig::<f64>::load(&path).unwrap();
    assert_eq!(cfg.horizon, 400);
    assert_eq!(cfg.changepoints().len(), 9);
}

#[test]
fn summary_recomputes_from_raw_output() {
    let dir = TempDir::new().unwrap();
    let cfg = short_scenario(dir.path(), 40);
    let out = dir.path().join("raw.csv");
    let o = cli(&run_args(cfg.to_str().unwrap(), out.to_str().unwrap(), "apf,imm20"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let runs = read_raw(std::fs::File::open(&out).unwrap(), 40).unwrap();
    assert_eq!(runs.len(), 6);
    let mut summary = csv::Reader::from_path(dir.path().join("raw.summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = summary.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 80);
    for name in ["apf", "imm20"] {
        let subset: Vec<_> = runs.iter().filter(|r| r.filter == name).cloned().collect();
        let m = aggregate(&subset, 40).unwrap();
        for row in rows.iter().filter(|r| &r[1] == name) {
            let t: usize = row[0].parse().unwrap();
            let v: f64 = row[2].parse().unwrap();
            assert!((v - m.rmse_pos[t - 1]).abs() <= 1e-9 * v.max(1.0), "{name} t={t}");
        }
    }
}

#[test]
fn same_seed_same_output() {
    let dir = TempDir::new().unwrap();
    let cfg = short_scenario(dir.path(), 30);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert!(cli(&run_args(cfg.to_str().unwrap(), out.to_str().unwrap(), "ape")).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn relative_series_against_reference() {
    let dir = TempDir::new().unwrap();
    let cfg = short_scenario(dir.path(), 20);
    let out = dir.path().join("rel.csv");
    let mut args = run_args(cfg.to_str().unwrap(), out.to_str().unwrap(), "imm20");
    args.extend(["--reference", "apf"]);
    assert!(cli(&args).status.success());
    let mut summary = csv::Reader::from_path(dir.path().join("rel.summary.csv")).unwrap();
    for row in summary.records().map(Result::unwrap).filter(|r| &r[1] == "apf") {
        assert_eq!(row[4].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    let missing = dir.path().join("missing.json");
    assert_eq!(cli(&run_args(missing.to_str().unwrap(), out.to_str().unwrap(), "apf")).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"horizon": 10, "bogus": 1}"#).unwrap();
    assert_eq!(cli(&run_args(bad.to_str().unwrap(), out.to_str().unwrap(), "apf")).status.code(), Some(2));

    let cfg = short_scenario(dir.path(), 10);
    assert_eq!(cli(&run_args(cfg.to_str().unwrap(), out.to_str().unwrap(), "kalman")).status.code(), Some(2));
}

#[test]
fn total_collapse_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = short_scenario(dir.path(), 160);
    let out = dir.path().join("lw.csv");
    let o = cli(&run_args(cfg.to_str().unwrap(), out.to_str().unwrap(), "lw"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    let runs = read_raw(std::fs::File::open(&out).unwrap(), 160).unwrap();
    assert!(runs.iter().all(|r| r.collapsed()));
}
