//! `baggls ingest`: motif matches and attribution tracks to a design.

use std::path::{Path, PathBuf};

use baggls::ingest::{
    aggregate_motif_scores, build_coactivation_design, parse_matches, parse_tracks, DEFAULT_P_THRESHOLD,
    DEFAULT_QUANTILE_CUTOFF,
};
use baggls::model::{DesignMatrix, EffectColumn, IndicatorMatrix};
use clap::Args;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::io::{self, in_file, CliError, CliResult, FORMAT_VERSION};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// FIMO-style tab-separated match table.
    #[arg(long)]
    pub fimo: PathBuf,
    /// Attribution tracks: `sequence_id,label,score_0,score_1,...` per row.
    #[arg(long)]
    pub attributions: PathBuf,
    /// Keep matches with p-value at or below this.
    #[arg(long, default_value_t = DEFAULT_P_THRESHOLD)]
    pub p_threshold: f64,
    /// Keep interactions whose co-occurrence count reaches this quantile.
    #[arg(long, default_value_t = DEFAULT_QUANTILE_CUTOFF)]
    pub quantile: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    fimo: &'a Path,
    attributions: &'a Path,
    p_threshold: f64,
    quantile: f64,
    out_dir: &'a Path,
}

#[derive(Serialize)]
struct PairCount {
    motifs: [String; 2],
    count: usize,
    retained: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    format_version: u32,
    command: &'static str,
    config: Config<'a>,
    sequences: usize,
    positives: usize,
    matches_kept: usize,
    motifs: Vec<String>,
    count_threshold: Option<f64>,
    pairs: Vec<PairCount>,
    p: usize,
}

pub fn run(args: &IngestArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.p_threshold) {
        return Err(CliError::Usage(format!("--p-threshold {} is not in [0, 1]", args.p_threshold)));
    }
    if !(0.0..1.0).contains(&args.quantile) {
        return Err(CliError::Usage(format!("--quantile {} is not in [0, 1)", args.quantile)));
    }
    let matches = parse_matches(io::open(&args.fimo)?, args.p_threshold).map_err(in_file(&args.fimo))?;
    let tracks = parse_tracks(io::open(&args.attributions)?).map_err(in_file(&args.attributions))?;
    if tracks.is_empty() {
        return Err(CliError::Data(format!("{}: no attribution tracks", args.attributions.display())));
    }
    let scores = aggregate_motif_scores(&matches, &tracks)?;
    let names = scores.features.names().to_vec();
    io::create_dir(&args.out_dir)?;
    let dir = &args.out_dir;

    let mut header = vec!["sequence_id".to_string()];
    header.extend(names.iter().cloned());
    let rows = scores.sequence_ids.iter().enumerate().map(|(i, id)| {
        let mut row = vec![id.clone()];
        row.extend(scores.features.values().row(i).iter().map(|&v| io::fmt_f64(v)));
        row
    });
    io::write_csv(&dir.join("features.csv"), &header, rows)?;
    io::write_response(&dir.join("response.csv"), &scores.response)?;

    let (p, count_threshold, pairs) = if matches.is_empty() {
        eprintln!(
            "warning: no matches with p-value <= {}; writing an intercept-only design",
            args.p_threshold
        );
        let columns = vec![EffectColumn::intercept()];
        let design = DesignMatrix::new(DMatrix::from_element(tracks.len(), 1, 1.0), columns.clone())?;
        let indicator = IndicatorMatrix::from_columns(&columns, 0)?;
        io::write_design(dir, &design, &indicator, &names)?;
        (1, None, Vec::new())
    } else {
        let co = build_coactivation_design(&scores.features, args.quantile)?;
        io::write_design(dir, &co.design, &co.indicator, &names)?;
        let pairs = co
            .counts
            .iter()
            .map(|(&(a, b), &count)| PairCount {
                motifs: [names[a].clone(), names[b].clone()],
                count,
                retained: co.retained.contains(&(a, b)),
            })
            .collect();
        (co.design.p(), co.count_threshold, pairs)
    };
    io::write_json(
        &dir.join("ingest.json"),
        &Summary {
            format_version: FORMAT_VERSION,
            command: "ingest",
            config: Config {
                fimo: &args.fimo,
                attributions: &args.attributions,
                p_threshold: args.p_threshold,
                quantile: args.quantile,
                out_dir: dir,
            },
            sequences: scores.sequence_ids.len(),
            positives: scores.response.positives(),
            matches_kept: matches.len(),
            motifs: names,
            count_threshold,
            pairs,
            p,
        },
    )
}
