//! Command-line front-end: configuration, subcommands and exit codes.
//!
//! Exit codes: 0 success, 2 configuration or model input error, 3 numerical
//! failure, 4 HJB residual gate failed, 5 optimality gate failed.

pub mod commands;
pub mod config;
pub mod figures;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{OutputFormat, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] spreadopt::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// `report` is the JSON that would have been printed on success.
    #[error("max relative residual {max_rel:e} exceeds {threshold:e}")]
    ResidualGate { max_rel: f64, threshold: f64, report: String },
    #[error("{message}")]
    OptimalityGate { message: String, report: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
            CliError::ResidualGate { .. } => 4,
            CliError::OptimalityGate { .. } => 5,
        }
    }

    /// Identifier printed on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Core(e) => e.name(),
            CliError::Io(_) => "IoError",
            CliError::ResidualGate { .. } => "ResidualGate",
            CliError::OptimalityGate { .. } => "OptimalityGate",
        }
    }

    /// Report still printed on stdout when a gate fails.
    pub fn report(&self) -> Option<&str> {
        match self {
            CliError::ResidualGate { report, .. } | CliError::OptimalityGate { report, .. } => Some(report),
            _ => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spreadopt", version, about = "Log-utility investment and consumption on mean-reverting spreads")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "spreadopt.toml")]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Overrides the number of time steps per path.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Overrides `run.grid_k`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Strategy: optimal, no-trade, scaled:<lambda>, const-c.
    #[arg(long, global = true, default_value = "optimal")]
    pub strategy: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the value function and write the g/f grid.
    Solve,
    /// Check the HJB residual on random states.
    ResidualCheck {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Use the optimal rule with the sign of the holdings reversed.
        #[arg(long)]
        flip_alpha: bool,
    },
    /// Write simulated paths of spread, wealth and controls.
    Simulate,
    /// Monte Carlo estimate of the objective of one strategy.
    Evaluate,
    /// Compare strategies against the optimal one on common paths.
    Dominance {
        #[arg(long, default_value = "optimal,no-trade,scaled:0.5,const-c")]
        strategies: String,
    },
    /// Write figure data and a gnuplot script (scalar markets only).
    Figures,
    /// Report alternative formula variants and the residuals they induce.
    Ledger {
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

impl Cli {
    /// Loads the configuration and applies command-line overrides.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        for (name, v) in [("--paths", self.paths), ("--steps", self.steps), ("--grid", self.grid)] {
            if v == Some(0) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if let Some(p) = self.paths {
            cfg.mc_paths = p;
        }
        if let Some(n) = self.steps {
            cfg.mc_steps = n;
        }
        if let Some(k) = self.grid {
            cfg.grid_k = k;
        }
        Ok(cfg)
    }
}

/// Runs a parsed command line and returns what goes to stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.resolve_config()?;
    commands::dispatch(cli, &cfg)
}
