//! `formdom`: checks domination and uniqueness properties of magnetic forms
//! on weighted graphs from the command line.
//!
//! Exit status is 0 when every check passes, 1 when a check reports a
//! mathematical failure and 2 for usage, parse or I/O errors.

mod commands;
mod envelope;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use formdom::config::{Tolerances, DEFAULT_T_GRID};

#[derive(Debug, Parser)]
#[command(
    name = "formdom",
    version,
    about = "Magnetic Schrödinger forms on weighted graphs"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Random samples per check.
    #[arg(long, global = true, default_value_t = 25)]
    pub samples: usize,
    /// Comma-separated semigroup times.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_T_GRID)]
    pub t_grid: Vec<f64>,
    /// Override the domination tolerance.
    #[arg(long, global = true)]
    pub tol_domination: Option<f64>,
    /// Report file (for `probe`: output directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn tolerances(&self) -> anyhow::Result<Tolerances> {
        let mut tol = Tolerances::default();
        if let Some(t) = self.tol_domination {
            tol.domination = t;
        }
        tol.validate()?;
        Ok(tol)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check graph axioms and, optionally, bundle data.
    Validate(commands::ValidateArgs),
    /// Semigroup domination, Kato inequality and first Beurling-Deny checks.
    Dominate(commands::DominateArgs),
    /// Dirichlet/Neumann exhaustion probe over a graph family.
    Probe(commands::ProbeArgs),
    /// Intrinsic metric checks and uniqueness criteria.
    Metric(commands::MetricArgs),
    /// Write the assembled energy matrix in Matrix Market format.
    Export(commands::ExportArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FORMDOM_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("FORMDOM_THREADS must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Validate(a) => commands::validate(&cli.run, a),
        Command::Dominate(a) => commands::dominate(&cli.run, a),
        Command::Probe(a) => commands::probe(&cli.run, a),
        Command::Metric(a) => commands::metric(&cli.run, a),
        Command::Export(a) => commands::export(&cli.run, a),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
