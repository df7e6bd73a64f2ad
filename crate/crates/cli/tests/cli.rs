use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dfs_cli::config::Config;
use dfs_cli::report::is_current;
use dfs_cli::PRESETS;

fn dfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfsim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("c.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn presets_validate() {
    for (name, text) in PRESETS {
        Config::parse(text).unwrap_or_else(|d| panic!("{name}: {d}"));
        let out = dfsim(&["validate", name]);
        assert_eq!(out.status.code(), Some(0), "{name}");
    }
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"chsh\"\n[source]\nnu = 1.5\nbogus = 1\n");
    let out = dfsim(&["validate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("nu out of range [0,1)"), "{err}");
    assert!(err.contains("seed"), "{err}");
    assert!(err.contains("unknown key bogus"), "{err}");
    assert_eq!(err.lines().count(), 3, "{err}");
}

#[test]
fn unreadable_and_unparsable_configs_are_invalid() {
    assert_eq!(dfsim(&["validate", "/nonexistent/config.toml"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = [");
    assert_eq!(dfsim(&["run", &cfg]).status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = dfsim(&["run", "scan-delay", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let result = fs::read(a.join("result.scan-delay.txt")).unwrap();
    assert_eq!(result, fs::read(b.join("result.scan-delay.txt")).unwrap());
    assert!(a.join("summary.scan-delay.txt").exists());
    let csv = fs::read_to_string(a.join("scan.scan-delay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    let tree: serde_json::Value = serde_json::from_slice(&result).unwrap();
    assert_eq!(tree["results"]["delays_um"].as_array().unwrap().len(), 21);
    assert!(tree["results"]["fit"]["coherence_fwhm_um"]["value"].as_f64().is_some());
}

#[test]
fn seed_and_overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dfsim(&["run", "chsh", "--out", out, "--seed", "77", "--set", "analysis.total_counts=2000"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("result.chsh.txt")).unwrap();
    let tree: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(tree["meta"]["seed"], 77);
    assert_eq!(tree["config"]["analysis"]["total_counts"], 2000.0);
    let stale = Config::parse(dfs_cli::preset("chsh").unwrap()).unwrap();
    assert!(!is_current(&stale, &text));
    let mut current = stale.clone();
    current.seed = 77;
    current.analysis.total_counts = 2000.0;
    assert!(is_current(&current, &text));
}

#[test]
fn unconverged_estimates_exit_3_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dfsim(&[
        "run", "tomography", "--out", out,
        "--set", "analysis.mle_max_iterations=1",
        "--set", "analysis.state=werner",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("result.tomography.txt")).unwrap()).unwrap();
    assert_eq!(tree["meta"]["converged"], false);
    assert!(dir.path().join("rho_re.tomography.csv").exists());
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = dfsim(&["run", "chsh", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn state_table_rows_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let o = dfsim(&["run", "state-table", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("result.state-table.txt")).unwrap()).unwrap();
    let rows = tree["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        for col in ["S", "F", "E"] {
            assert_eq!(row["estimate"][col]["provenance"], "simulated");
            assert!(row["estimate"][col]["sd"].as_f64().unwrap() > 0.0);
        }
    }
    for label in ["source", "baseline", "distributed"] {
        let grid = fs::read_to_string(dir.path().join(format!("rho_{label}_re.state-table.csv"))).unwrap();
        assert_eq!(grid.lines().count(), 5);
    }
}
