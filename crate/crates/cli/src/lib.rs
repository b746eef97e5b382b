//! Command-line front end of the OMIT filter-cavity simulator.
//!
//! The binary is a thin wrapper around [`run`], which loads a configuration,
//! executes one subcommand and writes its table.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use omitlab_core::OmitError;

pub use commands::RunOptions;
pub use config::{load_config, parse_config, ConfigError, Format, RunConfig, DEFAULT_CONFIG};
pub use output::{Output, Table};

#[derive(Debug, Parser)]
#[command(name = "omitlab", version, about = "OMIT filter-cavity simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML). The bundled default is used when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.path`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed; overrides `noise.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format; overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Number of grid points; overrides the command's default.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form transmissivity, phase, rotation angle and group delay.
    ResponseSweep,
    /// OMIT linewidth and dip depth versus control power.
    LinewidthVsPower,
    /// Coupled-cavity finesse versus membrane position.
    FinesseScan,
    /// Lock-in and Monte Carlo noise-ellipse sweep.
    Ellipse,
    /// Exact two-sideband solution against the closed form.
    OracleCompare,
    /// Low-temperature requirement and force-noise budget.
    DesignCheck,
    /// Quality factor versus gas pressure.
    GasDamping,
    /// Print the bundled default configuration.
    DefaultConfig,
}

impl Command {
    pub const ALL_TABLES: [Command; 7] = [
        Command::ResponseSweep,
        Command::LinewidthVsPower,
        Command::FinesseScan,
        Command::Ellipse,
        Command::OracleCompare,
        Command::DesignCheck,
        Command::GasDamping,
    ];
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{command}: {source}")]
    Model {
        command: &'static str,
        #[source]
        source: OmitError,
    },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 configuration, 3 numerical failure,
    /// 4 precondition violation, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model { source, .. } if source.is_precondition() => 4,
            CliError::Model { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Outcome of a successful invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub summary: Vec<String>,
}

/// Execute a table-producing command on a validated configuration.
pub fn execute(command: Command, cfg: &RunConfig, opts: RunOptions) -> Result<Output, CliError> {
    let (name, result) = match command {
        Command::ResponseSweep => ("response-sweep", commands::response_sweep_cmd(cfg, opts)),
        Command::LinewidthVsPower => (
            "linewidth-vs-power",
            commands::linewidth_vs_power_cmd(cfg, opts),
        ),
        Command::FinesseScan => ("finesse-scan", commands::finesse_scan_cmd(cfg, opts)),
        Command::Ellipse => ("ellipse", commands::ellipse_cmd(cfg, opts)),
        Command::OracleCompare => ("oracle-compare", commands::oracle_compare_cmd(cfg, opts)),
        Command::DesignCheck => ("design-check", commands::design_check_cmd(cfg, opts)),
        Command::GasDamping => ("gas-damping", commands::gas_damping_cmd(cfg, opts)),
        Command::DefaultConfig => unreachable!("default-config produces no table"),
    };
    result.map_err(|source| CliError::Model {
        command: name,
        source,
    })
}

fn load(path: Option<&Path>) -> Result<(RunConfig, Vec<String>), ConfigError> {
    match path {
        Some(p) => load_config(p),
        None => parse_config(DEFAULT_CONFIG),
    }
}

/// Run one command line.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    if cli.command == Command::DefaultConfig {
        let files = match &cli.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join("default.toml");
                std::fs::write(&path, DEFAULT_CONFIG)?;
                vec![path]
            }
            None => {
                print!("{DEFAULT_CONFIG}");
                Vec::new()
            }
        };
        return Ok(Report {
            files,
            warnings: Vec::new(),
            summary: Vec::new(),
        });
    }
    let (cfg, warnings) = load(cli.config.as_deref())?;
    let opts = RunOptions {
        seed: cli.seed,
        points: cli.points,
    };
    let out = execute(cli.command, &cfg, opts)?;
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.path));
    let format = cli.format.unwrap_or(cfg.output.format);
    let path = out.write(&dir, format)?;
    let summary = out
        .notes
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    Ok(Report {
        files: vec![path],
        warnings,
        summary,
    })
}
