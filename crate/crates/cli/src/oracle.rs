//! `baggls oracle`: variational estimates against the Gibbs sampler, for
//! both group-factor updates.

use std::path::{Path, PathBuf};

use baggls::gibbs::{gibbs_fit, GibbsConfig};
use baggls::linalg::pearson;
use baggls::model::{BinaryResponse, DesignMatrix, IndicatorMatrix};
use baggls::simulate::{derive_seed, generate_dataset, BetaStar};
use baggls::vi::{fit, FitConfig};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{self, CliError, CliResult, DesignFiles, FORMAT_VERSION};
use crate::TruthArgs;

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Design to use instead of a simulated one (requires --indicator and --response).
    #[arg(long, requires_all = ["indicator", "response"])]
    pub design: Option<PathBuf>,
    #[arg(long, requires = "design")]
    pub indicator: Option<PathBuf>,
    #[arg(long, requires = "design")]
    pub response: Option<PathBuf>,
    /// Size of the simulated instance when no design is given.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[command(flatten)]
    pub truth: TruthArgs,
    /// Gibbs iterations, burn-in included.
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    /// Seeds the simulated data (stream 0) and the sampler (stream 1).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Source<'a> {
    design: Option<&'a Path>,
    indicator: Option<&'a Path>,
    response: Option<&'a Path>,
    n: Option<usize>,
    d: Option<usize>,
    beta_star: Option<BetaStar>,
}

#[derive(Serialize)]
struct Config<'a> {
    source: Source<'a>,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    tol: f64,
    max_sweeps: usize,
    out_dir: &'a Path,
}

#[derive(Serialize)]
struct Variant {
    variant: &'static str,
    delta_cross_term: bool,
    converged: bool,
    sweeps_used: usize,
    correlation: f64,
    max_abs_difference: f64,
    estimate: Vec<f64>,
}

#[derive(Serialize)]
struct Agreement<'a> {
    format_version: u32,
    command: &'static str,
    config: Config<'a>,
    n: usize,
    p: usize,
    labels: Vec<String>,
    gibbs_mean: Vec<f64>,
    gibbs_min_variance_parameter: f64,
    variants: Vec<Variant>,
}

pub fn run(args: &OracleArgs) -> CliResult<()> {
    if args.iterations <= args.burn_in {
        return Err(CliError::Usage(format!(
            "--iterations ({}) must exceed --burn-in ({})",
            args.iterations, args.burn_in
        )));
    }
    let base = FitConfig {
        tol: args.tol,
        max_sweeps: args.max_sweeps,
        ..FitConfig::default()
    };
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let beta_star = args.truth.beta_star()?;
    let (design, indicator, response): (DesignMatrix, IndicatorMatrix, BinaryResponse) = match &args.design {
        Some(design) => io::read_design(&DesignFiles {
            design: design.clone(),
            indicator: args.indicator.clone().expect("enforced by clap"),
            response: args.response.clone().expect("enforced by clap"),
        })?,
        None => {
            let data = generate_dataset(args.n, args.d, &beta_star, derive_seed(args.seed, &[0]))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            (data.design, data.indicator, data.response)
        }
    };
    let gibbs_config = GibbsConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        seed: derive_seed(args.seed, &[1]),
    };
    let (gibbs, fits) = rayon::join(
        || gibbs_fit(&design, &indicator, &response, &gibbs_config),
        || {
            [false, true]
                .par_iter()
                .map(|&cross| {
                    let config = FitConfig {
                        delta_cross_term: cross,
                        ..base
                    };
                    fit(&design, &indicator, &response, &config).map(|(_, r)| (cross, r))
                })
                .collect::<Vec<_>>()
        },
    );
    let gibbs = gibbs?;
    let gibbs_mean: Vec<f64> = gibbs.mean.iter().copied().collect();
    let mut variants = Vec::new();
    for outcome in fits {
        let (cross, result) = outcome?;
        let max_abs_difference = gibbs_mean
            .iter()
            .zip(&result.beta_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        variants.push(Variant {
            variant: if cross { "baggls-conjugate" } else { "baggls" },
            delta_cross_term: cross,
            converged: result.converged,
            sweeps_used: result.sweeps_used,
            correlation: pearson(&gibbs_mean, &result.beta_hat),
            max_abs_difference,
            estimate: result.beta_hat,
        });
    }
    io::create_dir(&args.out_dir)?;
    let simulated = args.design.is_none();
    io::write_json(
        &args.out_dir.join("agreement.json"),
        &Agreement {
            format_version: FORMAT_VERSION,
            command: "oracle",
            config: Config {
                source: Source {
                    design: args.design.as_deref(),
                    indicator: args.indicator.as_deref(),
                    response: args.response.as_deref(),
                    n: simulated.then_some(args.n),
                    d: simulated.then_some(args.d),
                    beta_star: simulated.then_some(beta_star),
                },
                iterations: args.iterations,
                burn_in: args.burn_in,
                seed: args.seed,
                tol: args.tol,
                max_sweeps: args.max_sweeps,
                out_dir: &args.out_dir,
            },
            n: design.n(),
            p: design.p(),
            labels: design.labels(),
            gibbs_mean,
            gibbs_min_variance_parameter: gibbs.min_variance_parameter,
            variants,
        },
    )
}
