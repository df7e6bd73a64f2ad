//! Run artifacts: one machine-readable tree, one fixed-width summary, and
//! CSV grids. Nothing here depends on wall-clock time, so equal inputs give
//! equal bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use dfs_core::qmath::DensityOperator;

use crate::config::Config;

/// Where a reported number comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Evaluated from the model without sampling.
    Exact,
    /// Estimated from simulated counts.
    Simulated,
    /// Parameter of a fit to simulated counts.
    Fitted,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Simulated => "simulated",
            Provenance::Fitted => "fitted",
        }
    }
}

/// A reported number with its optional standard deviation.
pub fn cell(value: f64, sd: Option<f64>, provenance: Provenance) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), json!(value));
    if let Some(sd) = sd {
        m.insert("sd".into(), json!(sd));
    }
    m.insert("provenance".into(), json!(provenance.label()));
    Value::Object(m)
}

/// Result of one experiment before it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub results: Value,
    /// Summary body; the header is added on write.
    pub summary: String,
    /// (name, CSV text); written as `<name>.<run>.csv`.
    pub grids: Vec<(String, String)>,
    /// False when an iterative estimate stopped before its tolerance.
    pub converged: bool,
}

impl Report {
    pub fn new(results: Value, summary: String) -> Self {
        Self { results, summary, grids: Vec::new(), converged: true }
    }
}

/// The machine-readable tree for a report.
pub fn result_tree(cfg: &Config, report: &Report) -> Value {
    json!({
        "meta": {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": cfg.experiment.name(),
            "run": cfg.run,
            "seed": cfg.seed,
            "config_hash": cfg.hash(),
            "converged": report.converged,
        },
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "results": report.results,
    })
}

pub fn result_text(cfg: &Config, report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&result_tree(cfg, report)).expect("tree serializes");
    s.push('\n');
    s
}

/// True when `text` is a result file produced from `cfg`.
pub fn is_current(cfg: &Config, text: &str) -> bool {
    serde_json::from_str::<Value>(text)
        .ok()
        .and_then(|v| v["meta"]["config_hash"].as_str().map(|h| h == cfg.hash()))
        .unwrap_or(false)
}

pub fn summary_text(cfg: &Config, report: &Report) -> String {
    let mut s = format!(
        "experiment {}  run {}  seed {}\nconfig {}\n\n{}",
        cfg.experiment,
        cfg.run,
        cfg.seed,
        &cfg.hash()[..16],
        report.summary
    );
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Writes every artifact into `dir` and returns the written paths.
pub fn write(cfg: &Config, report: &Report, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(format!("result.{}.txt", cfg.run), result_text(cfg, report))?;
    put(format!("summary.{}.txt", cfg.run), summary_text(cfg, report))?;
    for (name, csv) in &report.grids {
        put(format!("{name}.{}.csv", cfg.run), csv.clone())?;
    }
    Ok(written)
}

const BASIS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Real and imaginary parts of a two-qubit density matrix as labelled grids.
pub fn density_grids(rho: &DensityOperator) -> (String, String) {
    let grid = |part: fn(f64, f64) -> f64| {
        let mut s = format!(",{}\n", BASIS.join(","));
        for (r, label) in BASIS.iter().enumerate() {
            let row: Vec<String> = (0..4).map(|c| {
                let z = rho.get(r, c);
                format!("{:.6}", part(z.re, z.im))
            }).collect();
            s.push_str(&format!("{label},{}\n", row.join(",")));
        }
        s
    };
    (grid(|re, _| re), grid(|_, im| im))
}

/// `{:.4}` with an optional `± sd`.
pub fn pm(value: f64, sd: Option<f64>) -> String {
    match sd {
        Some(sd) => format!("{value:.4} ± {sd:.4}"),
        None => format!("{value:.4}"),
    }
}
