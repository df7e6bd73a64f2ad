//! Config-driven runner for the DFS distribution simulator.
//!
//! A run reads a TOML configuration (or a built-in preset), applies
//! `--set` overrides, validates everything at once, executes the named
//! experiment and writes its artifacts. Exit codes: 0 success, 1 runtime
//! failure, 2 invalid configuration, 3 an estimate did not converge (the
//! artifacts are still written).

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use toml::Table;

use config::{apply_overrides, Config, Diagnostics};
use report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Built-in configurations, addressable by name instead of a path.
pub const PRESETS: [(&str, &str); 7] = [
    ("state-table", include_str!("../../../configs/state-table.toml")),
    ("run-protocol", include_str!("../../../configs/run-protocol.toml")),
    ("baseline", include_str!("../../../configs/baseline.toml")),
    ("tomography", include_str!("../../../configs/tomography.toml")),
    ("chsh", include_str!("../../../configs/chsh.toml")),
    ("scan-delay", include_str!("../../../configs/scan-delay.toml")),
    ("multiphoton-budget", include_str!("../../../configs/multiphoton-budget.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(Diagnostics),
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: std::io::Error },
    #[error("{0}")]
    Runtime(#[from] dfs_core::error::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Unreadable { .. } => EXIT_INVALID,
            CliError::Runtime(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

/// Options common to `run` and `validate`.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    /// Path to a TOML file, or a preset name.
    pub config: String,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn source_text(config: &str) -> Result<String, CliError> {
    let path = Path::new(config);
    if !path.exists() {
        if let Some(text) = preset(config) {
            return Ok(text.to_string());
        }
    }
    fs::read_to_string(path).map_err(|source| CliError::Unreadable { path: config.to_string(), source })
}

/// Reads, overrides and validates a configuration.
pub fn load(inv: &Invocation) -> Result<Config, CliError> {
    let text = source_text(&inv.config)?;
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Invalid(Diagnostics(vec![format!("parse error: {}", e.message())])))?;
    let mut overrides = inv.overrides.clone();
    if let Some(seed) = inv.seed {
        overrides.push(format!("seed={seed}"));
    }
    apply_overrides(&mut root, &overrides).map_err(CliError::Invalid)?;
    let mut cfg = Config::from_table(&root).map_err(CliError::Invalid)?;
    if let Some(out) = &inv.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Executes a run and writes its artifacts.
pub fn run(inv: &Invocation) -> Result<(Config, Report, Vec<PathBuf>), CliError> {
    let cfg = load(inv)?;
    let report = experiments::execute(&cfg)?;
    let written = report::write(&cfg, &report, Path::new(&cfg.output.dir))?;
    Ok((cfg, report, written))
}

/// `run` as a process: prints the summary or diagnostics, returns the exit code.
pub fn run_main(inv: &Invocation) -> i32 {
    match run(inv) {
        Ok((cfg, report, written)) => {
            print!("{}", report::summary_text(&cfg, &report));
            for p in &written {
                println!("wrote {}", p.display());
            }
            if report.converged {
                EXIT_OK
            } else {
                eprintln!("error: an iterative estimate did not converge; partial results written");
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}

/// `validate` as a process.
pub fn validate_main(inv: &Invocation) -> i32 {
    match load(inv) {
        Ok(cfg) => {
            println!("{}: valid ({} run {}, config {})", inv.config, cfg.experiment, cfg.run, &cfg.hash()[..16]);
            EXIT_OK
        }
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}

fn report_error(e: &CliError) {
    match e {
        CliError::Invalid(d) => {
            for line in &d.0 {
                eprintln!("error: {line}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}
