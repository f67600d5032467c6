//! Builds model inputs from motif-scanner matches and per-position
//! attribution scores.
//!
//! Pipeline: parse FIMO-style match tables, average `|score|` over each
//! motif's matched positions per sequence, normalize every sequence row to
//! sum 1, then add co-activation interactions (products of motif scores)
//! for motif pairs that co-occur often enough.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::design::build_design_from_kinds;
use crate::error::{Error, Result};
use crate::metrics::quantile;
use crate::model::{BinaryResponse, DesignMatrix, EffectKind, FeatureMatrix, IndicatorMatrix};

/// FIMO's default significance threshold.
pub const DEFAULT_P_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_QUANTILE_CUTOFF: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strand {
    Forward,
    Reverse,
    Unspecified,
}

/// One motif occurrence, stored half-open: positions `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotifMatch {
    pub sequence_id: String,
    pub motif_id: String,
    pub start: usize,
    pub end: usize,
    pub p_value: f64,
    pub strand: Strand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionTrack {
    pub sequence_id: String,
    pub label: bool,
    pub scores: Vec<f64>,
}

const MOTIF_HEADERS: &[&str] = &["motif_id", "pattern name", "pattern_name"];
const SEQUENCE_HEADERS: &[&str] = &["sequence_name", "sequence name", "sequence_id"];
const START_HEADERS: &[&str] = &["start"];
const STOP_HEADERS: &[&str] = &["stop", "end"];
const STRAND_HEADERS: &[&str] = &["strand"];
const P_VALUE_HEADERS: &[&str] = &["p-value", "p_value", "pvalue"];

fn find_column(header: &[String], aliases: &[&str]) -> Option<usize> {
    header.iter().position(|h| aliases.contains(&h.as_str()))
}

/// Reads a tab-separated match table and keeps rows with
/// `p-value <= p_threshold`. The first non-blank line is the header (a
/// leading `#` is allowed, as in older FIMO output); later lines starting
/// with `#` are comments. Input coordinates are 1-based inclusive.
pub fn parse_matches<R: BufRead>(reader: R, p_threshold: f64) -> Result<Vec<MotifMatch>> {
    if !(p_threshold >= 0.0 && p_threshold <= 1.0) {
        return Err(Error::invalid(format!("p-value threshold {p_threshold} is not in [0, 1]")));
    }
    let mut lines = reader.lines().enumerate();
    let (header_line, header) = loop {
        match lines.next() {
            None => return Err(Error::Parse { line: 0, message: "empty match table".into() }),
            Some((i, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    let header: Vec<String> = line
                        .trim_start_matches('#')
                        .split('\t')
                        .map(|h| h.trim().to_ascii_lowercase())
                        .collect();
                    break (i + 1, header);
                }
            }
        }
    };
    let required = |aliases: &[&str], name: &str| {
        find_column(&header, aliases).ok_or_else(|| Error::Parse {
            line: header_line,
            message: format!("missing required column {name:?}"),
        })
    };
    let motif_col = required(MOTIF_HEADERS, "motif_id")?;
    let seq_col = required(SEQUENCE_HEADERS, "sequence_name")?;
    let start_col = required(START_HEADERS, "start")?;
    let stop_col = required(STOP_HEADERS, "stop")?;
    let p_col = required(P_VALUE_HEADERS, "p-value")?;
    let strand_col = find_column(&header, STRAND_HEADERS);

    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = |message: String| Error::Parse { line: line_no, message };
        let field = |c: usize, name: &str| {
            fields
                .get(c)
                .copied()
                .ok_or_else(|| bad(format!("row has no {name} field ({} fields)", fields.len())))
        };
        let start: usize = field(start_col, "start")?
            .parse()
            .map_err(|_| bad(format!("start {:?} is not a positive integer", fields[start_col])))?;
        let stop: usize = field(stop_col, "stop")?
            .parse()
            .map_err(|_| bad(format!("stop {:?} is not a positive integer", fields[stop_col])))?;
        if start < 1 || stop < start {
            return Err(bad(format!("coordinates start = {start}, stop = {stop} are not 1-based with start <= stop")));
        }
        let p_value: f64 = field(p_col, "p-value")?
            .parse()
            .map_err(|_| bad(format!("p-value {:?} is not a number", fields[p_col])))?;
        if !(p_value > 0.0 && p_value <= 1.0) {
            return Err(bad(format!("p-value {p_value} is not in (0, 1]")));
        }
        let strand = match strand_col.and_then(|c| fields.get(c).copied()) {
            Some("+") => Strand::Forward,
            Some("-") => Strand::Reverse,
            Some("" | ".") | None => Strand::Unspecified,
            Some(other) => return Err(bad(format!("strand {other:?} is not +, - or ."))),
        };
        let motif_id = field(motif_col, "motif_id")?;
        let sequence_id = field(seq_col, "sequence_name")?;
        if motif_id.is_empty() || sequence_id.is_empty() {
            return Err(bad("empty motif or sequence identifier".into()));
        }
        if p_value <= p_threshold {
            out.push(MotifMatch {
                sequence_id: sequence_id.to_string(),
                motif_id: motif_id.to_string(),
                start: start - 1,
                end: stop,
                p_value,
                strand,
            });
        }
    }
    Ok(out)
}

/// Reads attribution tracks, one sequence per row:
/// `sequence_id, label, score_0, score_1, ...`. Rows may be comma- or
/// tab-separated (decided per line) and may have different lengths. An
/// optional header row starts with `sequence_id`.
pub fn parse_tracks<R: BufRead>(reader: R) -> Result<Vec<AttributionTrack>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let sep = if trimmed.contains('\t') { '\t' } else { ',' };
        let fields: Vec<&str> = trimmed.split(sep).map(str::trim).collect();
        if out.is_empty() && seen.is_empty() && fields[0].eq_ignore_ascii_case("sequence_id") {
            continue;
        }
        let bad = |message: String| Error::Parse { line: line_no, message };
        if fields.len() < 3 {
            return Err(bad("track row needs an id, a label and at least one score".into()));
        }
        let label = match fields[1] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label {other:?} is not 0 or 1"))),
        };
        let scores = fields[2..]
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("score {s:?} is not a finite number"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(fields[0].to_string()) {
            return Err(bad(format!("duplicate sequence id {:?}", fields[0])));
        }
        out.push(AttributionTrack {
            sequence_id: fields[0].to_string(),
            label,
            scores,
        });
    }
    Ok(out)
}

/// Per-sequence motif scores with their labels; rows and columns are in
/// sorted identifier order.
#[derive(Debug, Clone)]
pub struct MotifScores {
    pub features: FeatureMatrix,
    pub sequence_ids: Vec<String>,
    pub response: BinaryResponse,
}

/// For each (sequence, motif): the mean of `|score|` over the union of that
/// motif's matched positions, zero when the motif does not match. Each row
/// is then divided by its sum; all-zero rows stay zero.
pub fn aggregate_motif_scores(matches: &[MotifMatch], tracks: &[AttributionTrack]) -> Result<MotifScores> {
    let mut by_id: BTreeMap<&str, &AttributionTrack> = BTreeMap::new();
    for t in tracks {
        if by_id.insert(&t.sequence_id, t).is_some() {
            return Err(Error::invalid(format!("duplicate track for sequence {:?}", t.sequence_id)));
        }
        if let Some(v) = t.scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("track {:?} has non-finite score {v}", t.sequence_id)));
        }
    }
    let motifs: Vec<&str> = matches
        .iter()
        .map(|m| m.motif_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let motif_index: HashMap<&str, usize> = motifs.iter().enumerate().map(|(k, &m)| (m, k)).collect();
    let seq_index: HashMap<&str, usize> = by_id.keys().enumerate().map(|(i, &s)| (s, i)).collect();

    // Union of matched positions per (sequence, motif).
    let mut positions: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for m in matches {
        let track = by_id
            .get(m.sequence_id.as_str())
            .ok_or_else(|| Error::invalid(format!("match on sequence {:?} has no attribution track", m.sequence_id)))?;
        if m.start >= m.end || m.end > track.scores.len() {
            return Err(Error::invalid(format!(
                "match of {:?} at {}..{} is outside sequence {:?} of length {}",
                m.motif_id,
                m.start,
                m.end,
                m.sequence_id,
                track.scores.len()
            )));
        }
        positions
            .entry((seq_index[m.sequence_id.as_str()], motif_index[m.motif_id.as_str()]))
            .or_default()
            .extend(m.start..m.end);
    }

    let tracks_sorted: Vec<&AttributionTrack> = by_id.values().copied().collect();
    let mut values = DMatrix::zeros(tracks_sorted.len(), motifs.len());
    for (&(i, k), pos) in &positions {
        let scores = &tracks_sorted[i].scores;
        values[(i, k)] = pos.iter().map(|&q| scores[q].abs()).sum::<f64>() / pos.len() as f64;
    }
    for mut row in values.row_iter_mut() {
        let sum = row.sum();
        if sum > 0.0 {
            row /= sum;
        }
    }
    Ok(MotifScores {
        features: FeatureMatrix::new(values, motifs.iter().map(|m| m.to_string()).collect())?,
        sequence_ids: tracks_sorted.iter().map(|t| t.sequence_id.clone()).collect(),
        response: BinaryResponse::from_bools(tracks_sorted.iter().map(|t| t.label).collect()),
    })
}

/// Number of rows where both features are nonzero, for every pair that
/// co-occurs at least once, in lexicographic pair order.
pub fn cooccurrence_counts(features: &FeatureMatrix) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for row in features.values().row_iter() {
        let nonzero: Vec<usize> = (0..row.len()).filter(|&l| row[l] != 0.0).collect();
        for (x, &a) in nonzero.iter().enumerate() {
            for &b in &nonzero[x + 1..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone)]
pub struct CoactivationDesign {
    pub design: DesignMatrix,
    pub indicator: IndicatorMatrix,
    /// Co-occurrence counts of all candidate pairs.
    pub counts: BTreeMap<(usize, usize), usize>,
    /// Minimum count a pair needed to be retained; `None` with no candidates.
    pub count_threshold: Option<f64>,
    /// Retained interaction pairs in column order.
    pub retained: Vec<(usize, usize)>,
}

/// Intercept and every motif column, plus the interaction of each pair
/// whose co-occurrence count reaches the `quantile_cutoff` quantile of the
/// counts over co-occurring pairs. Interactions are products of the
/// (row-normalized) motif scores; all columns are then standardized.
pub fn build_coactivation_design(features: &FeatureMatrix, quantile_cutoff: f64) -> Result<CoactivationDesign> {
    if !(0.0..1.0).contains(&quantile_cutoff) {
        return Err(Error::invalid(format!("quantile cutoff {quantile_cutoff} is not in [0, 1)")));
    }
    let counts = cooccurrence_counts(features);
    let values: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    let count_threshold = quantile(&values, quantile_cutoff);
    let retained: Vec<(usize, usize)> = match count_threshold {
        Some(th) => counts
            .iter()
            .filter(|(_, &c)| c as f64 >= th)
            .map(|(&pair, _)| pair)
            .collect(),
        None => Vec::new(),
    };
    let mut kinds = vec![EffectKind::Intercept];
    kinds.extend((0..features.d()).map(EffectKind::Linear));
    kinds.extend(retained.iter().map(|&(a, b)| EffectKind::Interaction(a, b)));
    let (design, indicator) = build_design_from_kinds(features, &kinds, false)?;
    Ok(CoactivationDesign {
        design,
        indicator,
        counts,
        count_threshold,
        retained,
    })
}
