//! `baggls benchmark`: the simulation study over a grid of scenarios.

use std::path::PathBuf;

use baggls::simulate::{run_benchmark, BenchmarkConfig, BetaStar, Estimator, Scenario, TARGET_LABELS};
use baggls::vi::FitConfig;
use clap::Args;
use serde::Serialize;

use crate::io::{self, CliError, CliResult, FORMAT_VERSION};
use crate::TruthArgs;

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Comma-separated scenarios `<n>x<d>`, e.g. `500x10,2000x10`.
    #[arg(long, value_delimiter = ',', default_value = "500x10")]
    pub grid: Vec<Scenario>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub holdout_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated estimators: `baggls` and/or `baggls-conjugate`.
    #[arg(long, value_delimiter = ',', default_value = "baggls")]
    pub estimators: Vec<Estimator>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    #[command(flatten)]
    pub truth: TruthArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    grid: Vec<String>,
    repetitions: usize,
    holdout_n: usize,
    seed: u64,
    estimators: &'a [Estimator],
    beta_star: BetaStar,
    fit: FitConfig,
    out_dir: &'a std::path::Path,
}

#[derive(Serialize)]
struct Aggregates<'a> {
    format_version: u32,
    command: &'static str,
    config: Config<'a>,
    targets: [&'static str; 3],
    aggregates: &'a [baggls::simulate::ScenarioAggregate],
}

#[derive(Serialize)]
struct RunTiming {
    scenario: String,
    repetition: usize,
    estimator: Estimator,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct Timing {
    format_version: u32,
    total_seconds: f64,
    runs: Vec<RunTiming>,
}

const RUN_COLUMNS: &[&str] = &[
    "scenario",
    "n",
    "d",
    "p",
    "repetition",
    "estimator",
    "seed",
    "rmse",
    "rmse_active",
    "rmse_inactive",
    "auc",
    "brier",
    "sparsity",
    "top20_m1",
    "top20_m2",
    "top20_m1:m2",
    "top3_m1",
    "top3_m2",
    "top3_m1:m2",
    "sweeps",
    "converged",
    "error",
];

pub fn run(args: &BenchmarkArgs) -> CliResult<()> {
    if args.reps < 1 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if args.holdout_n < 2 {
        return Err(CliError::Usage("--holdout-n must be at least 2".into()));
    }
    let fit = FitConfig {
        tol: args.tol,
        max_sweeps: args.max_sweeps,
        ..FitConfig::default()
    };
    fit.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = BenchmarkConfig {
        grid: args.grid.clone(),
        repetitions: args.reps,
        estimators: args.estimators.clone(),
        seed: args.seed,
        holdout_n: args.holdout_n,
        beta_star: args.truth.beta_star()?,
        fit,
    };
    let start = std::time::Instant::now();
    let report = run_benchmark(&config)?;
    let total_seconds = start.elapsed().as_secs_f64();
    io::create_dir(&args.out_dir)?;

    let flag = |b: bool| u8::from(b).to_string();
    let rows = report.runs.iter().map(|r| {
        let mut row = vec![
            format!("{}x{}", r.n, r.d),
            r.n.to_string(),
            r.d.to_string(),
            r.p.to_string(),
            r.repetition.to_string(),
            r.estimator.name().to_string(),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(m) => {
                row.extend([m.rmse, m.rmse_active, m.rmse_inactive, m.auc, m.brier, m.sparsity].map(io::fmt_f64));
                row.extend(m.top20.iter().chain(&m.top3).map(|&b| flag(b)));
                row.push(m.sweeps.to_string());
                row.push(flag(m.converged));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 14)),
        }
        row.push(r.error.clone().unwrap_or_default());
        row
    });
    let header: Vec<String> = RUN_COLUMNS.iter().map(|s| s.to_string()).collect();
    io::write_csv(&args.out_dir.join("runs.csv"), &header, rows)?;
    io::write_json(
        &args.out_dir.join("aggregates.json"),
        &Aggregates {
            format_version: FORMAT_VERSION,
            command: "benchmark",
            config: Config {
                grid: config.grid.iter().map(|s| s.to_string()).collect(),
                repetitions: config.repetitions,
                holdout_n: config.holdout_n,
                seed: config.seed,
                estimators: &config.estimators,
                beta_star: config.beta_star,
                fit: config.fit,
                out_dir: &args.out_dir,
            },
            targets: TARGET_LABELS,
            aggregates: &report.aggregates,
        },
    )?;
    io::write_json(
        &args.out_dir.join("timing.json"),
        &Timing {
            format_version: FORMAT_VERSION,
            total_seconds,
            runs: report
                .runs
                .iter()
                .map(|r| RunTiming {
                    scenario: format!("{}x{}", r.n, r.d),
                    repetition: r.repetition,
                    estimator: r.estimator,
                    elapsed_seconds: r.elapsed_seconds,
                })
                .collect(),
        },
    )
}
