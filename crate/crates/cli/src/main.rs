//! `baggls`: simulate data, fit the variational model, benchmark it, build
//! designs from motif scans and compare against the Gibbs sampler.
//!
//! Exit codes: 0 success, 2 usage error, 3 data, parse or I/O error,
//! 4 numerical failure. Set `BAGGLS_THREADS` to bound the worker threads
//! used by `benchmark` and `oracle`.

mod benchmark;
mod fit;
mod ingest;
mod io;
mod oracle;
mod simulate;

use std::process::ExitCode;

use baggls::simulate::BetaStar;
use clap::{Args, Parser, Subcommand};

use crate::io::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(version, about = "Sparse Bayesian probit regression with an overlapping-group horseshoe prior")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset with Gamma features and a sparse probit truth.
    Simulate(simulate::SimulateArgs),
    /// Fit the variational approximation to a design.
    Fit(fit::FitArgs),
    /// Run the simulation study over a grid of (n, d) scenarios.
    Benchmark(benchmark::BenchmarkArgs),
    /// Build a co-activation design from motif matches and attribution tracks.
    Ingest(ingest::IngestArgs),
    /// Compare variational estimates with a long Gibbs run.
    Oracle(oracle::OracleArgs),
}

/// Options describing the simulated truth, shared by several commands.
#[derive(Args, Debug, Clone)]
pub struct TruthArgs {
    /// True coefficients: `m1,m2,m1:m2` or `intercept,m1,m2,m1:m2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta_star: Option<Vec<f64>>,
    /// Standardize without centering the simulated design columns.
    #[arg(long)]
    pub no_center: bool,
}

impl TruthArgs {
    pub fn beta_star(&self) -> CliResult<BetaStar> {
        let base = BetaStar {
            center: !self.no_center,
            ..BetaStar::default()
        };
        let Some(values) = &self.beta_star else {
            return Ok(base);
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("--beta-star values must be finite".into()));
        }
        match values.as_slice() {
            &[m1, m2, interaction] => Ok(BetaStar { m1, m2, interaction, ..base }),
            &[intercept, m1, m2, interaction] => Ok(BetaStar {
                intercept,
                m1,
                m2,
                interaction,
                ..base
            }),
            _ => Err(CliError::Usage(format!(
                "--beta-star takes 3 or 4 values, got {}",
                values.len()
            ))),
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("BAGGLS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("BAGGLS_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {threads} threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Fit(args) => fit::run(&args),
        Command::Benchmark(args) => benchmark::run(&args),
        Command::Ingest(args) => ingest::run(&args),
        Command::Oracle(args) => oracle::run(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
