use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dfs_cli::{run_main, validate_main, Invocation};

/// Simulates DFS-protected entanglement distribution and its analysis.
#[derive(Parser)]
#[command(name = "dfsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment named in a config file or preset.
    Run(Target),
    /// Check a config without running it; lists every violation.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    /// TOML config path or preset name (state-table, run-protocol, baseline,
    /// tomography, chsh, scan-delay, multiphoton-budget).
    config: String,
    /// Override a value, e.g. `--set source.nu=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Target> for Invocation {
    fn from(t: Target) -> Self {
        Invocation { config: t.config, overrides: t.overrides, seed: t.seed, out: t.out }
    }
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run(t) => run_main(&t.into()),
        Command::Validate(t) => validate_main(&t.into()),
    };
    ExitCode::from(code as u8)
}
