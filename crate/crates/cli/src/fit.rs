//! `baggls fit`: fit a design and write the estimates and their ranking.

use std::path::{Path, PathBuf};
use std::time::Instant;

use baggls::metrics::quantile;
use baggls::posterior::{rank_effects, sample_beta};
use baggls::vi::{fit, CovariancePath, FitConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::io::{self, CliResult, DesignFiles, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathArg {
    Auto,
    Direct,
    Woodbury,
}

impl From<PathArg> for CovariancePath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Auto => CovariancePath::Auto,
            PathArg::Direct => CovariancePath::Direct,
            PathArg::Woodbury => CovariancePath::Woodbury,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub indicator: PathBuf,
    #[arg(long)]
    pub response: PathBuf,
    /// Stop when no coefficient mean moves by `tol` or more in a sweep.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    /// Use the conjugate group-factor rate update.
    #[arg(long)]
    pub delta_cross_term: bool,
    #[arg(long, value_enum, default_value_t = PathArg::Auto)]
    pub covariance: PathArg,
    /// Number of draws from the approximate posterior to write to samples.csv.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    design: &'a Path,
    indicator: &'a Path,
    response: &'a Path,
    samples: usize,
    out: &'a Path,
    fit: FitConfig,
}

#[derive(Serialize)]
struct Coefficient {
    label: String,
    estimate: f64,
    /// Central 95% interval of the posterior draws, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    format_version: u32,
    command: &'static str,
    config: Config<'a>,
    n: usize,
    p: usize,
    converged: bool,
    sweeps_used: usize,
    final_delta: f64,
    delta_history: Vec<f64>,
    coefficients: Vec<Coefficient>,
}

#[derive(Serialize)]
struct Timing {
    format_version: u32,
    fit_seconds: f64,
    sampling_seconds: f64,
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let files = DesignFiles {
        design: args.design.clone(),
        indicator: args.indicator.clone(),
        response: args.response.clone(),
    };
    let config = FitConfig {
        tol: args.tol,
        max_sweeps: args.max_sweeps,
        delta_cross_term: args.delta_cross_term,
        covariance_path: args.covariance.into(),
        seed: args.seed,
        ..FitConfig::default()
    };
    config.validate().map_err(|e| io::CliError::Usage(e.to_string()))?;
    let (design, indicator, response) = io::read_design(&files)?;
    let (state, result) = fit(&design, &indicator, &response, &config)?;
    if !result.converged {
        eprintln!(
            "warning: not converged after {} sweeps (last change {:e})",
            result.sweeps_used, result.final_delta
        );
    }
    io::create_dir(&args.out)?;

    let sample_start = Instant::now();
    let mut intervals = vec![None; design.p()];
    if args.samples > 0 {
        let draws = sample_beta(&state, &design, &response, args.samples, args.seed)?;
        io::write_matrix(&args.out.join("samples.csv"), &design.labels(), &draws)?;
        for (j, slot) in intervals.iter_mut().enumerate() {
            let column: Vec<f64> = draws.column(j).iter().copied().collect();
            *slot = quantile(&column, 0.025).zip(quantile(&column, 0.975)).map(|(a, b)| [a, b]);
        }
    }
    let sampling_seconds = sample_start.elapsed().as_secs_f64();

    let ranking = rank_effects(&result.beta_hat, design.columns(), design.p());
    io::write_csv(
        &args.out.join("ranking.csv"),
        &["rank".into(), "label".into(), "coefficient".into()],
        ranking
            .iter()
            .map(|e| vec![e.rank.to_string(), e.label.clone(), io::fmt_f64(e.coefficient)]),
    )?;
    let coefficients = design
        .labels()
        .into_iter()
        .zip(&result.beta_hat)
        .zip(intervals)
        .map(|((label, &estimate), interval)| Coefficient {
            label,
            estimate,
            interval,
        })
        .collect();
    io::write_json(
        &args.out.join("fit.json"),
        &FitReport {
            format_version: FORMAT_VERSION,
            command: "fit",
            config: Config {
                design: &args.design,
                indicator: &args.indicator,
                response: &args.response,
                samples: args.samples,
                out: &args.out,
                fit: config,
            },
            n: design.n(),
            p: design.p(),
            converged: result.converged,
            sweeps_used: result.sweeps_used,
            final_delta: result.final_delta,
            delta_history: result.delta_history.clone(),
            coefficients,
        },
    )?;
    io::write_json(
        &args.out.join("timing.json"),
        &Timing {
            format_version: FORMAT_VERSION,
            fit_seconds: result.elapsed_seconds,
            sampling_seconds,
        },
    )
}
