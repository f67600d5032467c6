//! `baggls simulate`: write a simulated dataset.

use std::path::PathBuf;

use baggls::metrics::sparsity_ratio;
use baggls::simulate::{generate_dataset, BetaStar};
use clap::Args;
use serde::Serialize;

use crate::io::{self, CliResult, FORMAT_VERSION};
use crate::TruthArgs;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of observations.
    #[arg(long)]
    pub n: usize,
    /// Number of features; the design has 1 + d + d(d-1)/2 columns.
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub truth: TruthArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    n: usize,
    d: usize,
    seed: u64,
    beta_star: BetaStar,
    out_dir: &'a std::path::Path,
}

#[derive(Serialize)]
struct Coefficient {
    label: String,
    value: f64,
}

#[derive(Serialize)]
struct Truth<'a> {
    format_version: u32,
    command: &'static str,
    config: Config<'a>,
    p: usize,
    positives: usize,
    sparsity_ratio: f64,
    true_beta: Vec<Coefficient>,
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let beta_star = args.truth.beta_star()?;
    let data = generate_dataset(args.n, args.d, &beta_star, args.seed)
        .map_err(|e| io::CliError::Usage(e.to_string()))?;
    io::create_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    io::write_matrix(&dir.join("features.csv"), data.features.names(), data.features.values())?;
    io::write_design(dir, &data.design, &data.indicator, data.features.names())?;
    io::write_response(&dir.join("response.csv"), &data.response)?;
    let truth: Vec<f64> = data.true_beta.iter().copied().collect();
    io::write_json(
        &dir.join("truth.json"),
        &Truth {
            format_version: FORMAT_VERSION,
            command: "simulate",
            config: Config {
                n: args.n,
                d: args.d,
                seed: args.seed,
                beta_star,
                out_dir: dir,
            },
            p: data.design.p(),
            positives: data.response.positives(),
            sparsity_ratio: sparsity_ratio(&truth[1..]),
            true_beta: data
                .design
                .labels()
                .into_iter()
                .zip(truth)
                .map(|(label, value)| Coefficient { label, value })
                .collect(),
        },
    )
}
