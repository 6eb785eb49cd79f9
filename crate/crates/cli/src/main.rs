//! `rfsdde`: configuration-driven experiments for reflected fBm delay
//! equations.

mod commands;
mod config;
mod output;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, Validated};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} self-check(s) failed")]
    Checks(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Numerical(_) | Self::Checks(_) => 2,
        }
    }
}

impl From<rfsdde::Error> for CliError {
    fn from(e: rfsdde::Error) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Config(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "rfsdde", version, about = "Reflected fBm delay equations: simulation, densities and derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (built-in defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ensemble seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of paths (overrides the config).
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Per-path CSVs of x, y, z and x^ε for every ladder entry.
    Simulate,
    /// Law of X_{t0}: atom estimate, histogram, KDE, optional KS check.
    Density,
    /// Derivative columns D_s X_{t0}, dsquared and gradient checks.
    Derivative,
    /// Built-in consistency checks; exit 0 iff all pass.
    Selfcheck,
    /// Prints the default configuration as JSON.
    DefaultConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Density => "density",
            Self::Derivative => "derivative",
            Self::Selfcheck => "selfcheck",
            Self::DefaultConfig => "default-config",
        }
    }
}

fn prepare(cli: &Cli) -> Result<(Validated, PathBuf), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.paths {
        cfg.n_paths = n;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("rfsdde-out"));
    Ok((cfg.validate()?, out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::DefaultConfig = cli.command {
        let json = serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes");
        println!("{json}");
        return Ok(());
    }
    let (v, out) = prepare(cli)?;
    let echo = serde_json::to_value(&v.config).expect("config serializes");
    let mut failed = 0;
    let bundle = match cli.command {
        Command::Simulate => commands::simulate(&v)?,
        Command::Density => commands::density(&v)?,
        Command::Derivative => commands::derivative(&v)?,
        Command::Selfcheck => {
            let (checks, bundle) = selfcheck::run(&v)?;
            for c in &checks {
                println!("{:<16} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
            failed = checks.iter().filter(|c| !c.pass).count();
            bundle
        }
        Command::DefaultConfig => unreachable!(),
    };
    let hash = bundle.hash().to_string();
    let files = bundle.write(&out, cli.command.name(), &echo)?;
    println!("wrote {} files to {} (config hash {hash})", files.len(), out.display());
    if failed > 0 {
        return Err(CliError::Checks(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfsdde: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
