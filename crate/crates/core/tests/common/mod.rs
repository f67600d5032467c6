//! Reference computations and property checks shared by the integration
//! test targets. Each target uses a different subset.
#![allow(dead_code)]

use baggls::design::{build_design, standardize_columns, DesignOptions};
use baggls::ingest::{aggregate_motif_scores, build_coactivation_design, AttributionTrack, MotifMatch, Strand};
use baggls::metrics::{auc, rmse, sparsity_ratio, Subset};
use baggls::model::{BinaryResponse, EffectColumn, EffectKind, FeatureMatrix};
use baggls::posterior::{predict_prob, rank_effects};
use baggls::vi::{FitConfig, ViEngine};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod quadrature.

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = KRONROD_WEIGHTS[7] * f(mid);
    let mut gauss = GAUSS_WEIGHTS[3] * f(mid);
    for k in 0..7 {
        let dx = half * GK_NODES[k];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[k] * pair;
        if k % 2 == 1 {
            gauss += GAUSS_WEIGHTS[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// `∫_a^b f` by recursive bisection until each piece's Gauss/Kronrod
/// difference is below `tol`. The difference bounds the error of the Gauss
/// rule, so the Kronrod value returned is far more accurate than `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (value, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return value;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, tol, depth - 1) + recurse(f, mid, b, tol, depth - 1)
    }
    recurse(f, a, b, tol, 24)
}

/// Mean of `N(mean, var)` restricted to `sign · z > 0`, by quadrature.
///
/// With `u = sign · (z - mean) / sd` the condition is `u > a`,
/// `a = -sign · mean / sd`, and `t = u - a ≥ 0` has unnormalized density
/// `exp(-t (t + 2a) / 2)` (the factor `exp(-a²/2)` cancels in the ratio).
pub fn truncated_mean_by_quadrature(mean: f64, var: f64, sign: f64) -> f64 {
    let sd = var.sqrt();
    let a = -sign * mean / sd;
    let density = |t: f64| (-0.5 * t * (t + 2.0 * a)).exp();
    // Beyond the upper limit the density is below e^-600 of its peak.
    let peak = (-a).max(0.0);
    let upper = peak + 40.0;
    let pieces = [0.0, peak, upper];
    let mut mass = 0.0;
    let mut first = 0.0;
    for w in pieces.windows(2) {
        if w[1] > w[0] {
            let scale = density(w[0]).max(density(w[1]));
            mass += integrate(&density, w[0], w[1], 1e-12 * scale);
            first += integrate(&|t| t * density(t), w[0], w[1], 1e-12 * scale * upper);
        }
    }
    mean + sign * sd * (a + first / mass)
}

/// The grid over which the closed form is checked against quadrature.
pub fn truncated_mean_grid() -> Vec<(f64, f64, f64)> {
    let means: Vec<f64> = (0..=80).map(|k| -10.0 + 0.25 * k as f64).collect();
    let vars = [1.0001, 1.01, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let mut grid = Vec::new();
    for &m in &means {
        for &v in &vars {
            for s in [1.0, -1.0] {
                grid.push((m, v, s));
            }
        }
    }
    grid
}

/// Largest absolute difference between the closed form and quadrature on
/// the grid, with its location.
pub fn truncated_mean_max_error() -> (f64, (f64, f64, f64)) {
    let mut worst = (0.0, (0.0, 0.0, 0.0));
    for (m, v, s) in truncated_mean_grid() {
        let err = (baggls::normal::truncated_mean(m, v, s) - truncated_mean_by_quadrature(m, v, s)).abs();
        if !(err <= worst.0) {
            worst = (err, (m, v, s));
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Strategies.

pub fn feature_matrix(max_n: usize, max_d: usize) -> impl Strategy<Value = FeatureMatrix> {
    (3..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(0.0f64..5.0, n * d).prop_map(move |v| {
            let names = (0..d).map(|l| format!("f{l}")).collect();
            FeatureMatrix::new(DMatrix::from_row_slice(n, d, &v), names).unwrap()
        })
    })
}

pub fn scores_and_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                // Coarse scores so that ties occur.
                prop::collection::vec((0u8..20).prop_map(|k| k as f64 / 19.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, y)| y.iter().any(|&v| v) && y.iter().any(|&v| !v))
}

fn linear_columns(p: usize) -> Vec<EffectColumn> {
    let mut cols = vec![EffectColumn::intercept()];
    cols.extend((1..p).map(|j| EffectColumn {
        kind: EffectKind::Linear(j - 1),
        label: format!("e{j}"),
        center: 0.0,
        scale: 1.0,
    }));
    cols
}

/// A random sparse score table: `(rows, motifs)` with some zero entries.
pub fn sparse_features(max_n: usize, max_d: usize) -> impl Strategy<Value = FeatureMatrix> {
    (3..=max_n, 2..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n * d).prop_map(move |v| {
            let names = (0..d).map(|l| format!("M{l}")).collect();
            FeatureMatrix::new(DMatrix::from_row_slice(n, d, &v), names).unwrap()
        })
    })
}

// ---------------------------------------------------------------------------
// Properties. Each returns an error describing the first violation.

pub fn check_standardization_idempotent(features: &FeatureMatrix) -> Result<(), TestCaseError> {
    let opts = DesignOptions::default();
    let (design, _) = build_design(features, &opts).unwrap();
    let kinds: Vec<EffectKind> = design.columns().iter().map(|c| c.kind).collect();
    let again = standardize_columns(design.values(), &kinds, false).unwrap();
    for (j, constant) in again.constant.iter().enumerate() {
        let diff = (again.values.column(j) - design.values().column(j)).amax();
        prop_assert!(diff <= 1e-12, "column {j} changed by {diff} (constant: {constant})");
    }
    Ok(())
}

pub fn check_indicator_and_products(features: &FeatureMatrix) -> Result<(), TestCaseError> {
    let (design, indicator) = build_design(features, &DesignOptions::default()).unwrap();
    let raw = features.values();
    for (j, col) in design.columns().iter().enumerate() {
        let expected_sum = match col.kind {
            EffectKind::Intercept => 0,
            EffectKind::Linear(_) => 1,
            EffectKind::Interaction(..) => 2,
        };
        prop_assert_eq!(indicator.groups_of(j).len(), expected_sum);
        if let EffectKind::Interaction(a, b) = col.kind {
            for i in 0..design.n() {
                let unscaled = design.values()[(i, j)] * col.scale + col.center;
                let product = raw[(i, a)] * raw[(i, b)];
                prop_assert!((unscaled - product).abs() <= 1e-12 * product.abs().max(1.0));
            }
        }
    }
    Ok(())
}

pub fn check_rmse_pythagorean(est: &[f64], truth: &[f64]) -> Result<(), TestCaseError> {
    let all = rmse(est, truth, Subset::All).unwrap();
    let active = rmse(est, truth, Subset::Active);
    let inactive = rmse(est, truth, Subset::Inactive);
    let split = active.map(|v| v * v).unwrap_or(0.0) + inactive.map(|v| v * v).unwrap_or(0.0);
    prop_assert!((all * all - split).abs() <= 1e-10 * (1.0 + all * all));
    Ok(())
}

pub fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (k, &sk) in scores.iter().enumerate() {
            if labels[i] && !labels[k] {
                pairs += 1.0;
                wins += if si > sk {
                    1.0
                } else if si == sk {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

pub fn check_auc_brute_force(scores: &[f64], labels: &[bool]) -> Result<(), TestCaseError> {
    let fast = auc(scores, labels).unwrap();
    let slow = brute_force_auc(scores, labels);
    prop_assert!((fast - slow).abs() <= 1e-12, "{} vs {}", fast, slow);
    Ok(())
}

pub fn check_sparsity_scale_invariance(beta: &[f64], c: f64) -> Result<(), TestCaseError> {
    let scaled: Vec<f64> = beta.iter().map(|b| b * c).collect();
    let (r, rc) = (sparsity_ratio(beta), sparsity_ratio(&scaled));
    prop_assert!((r - rc).abs() <= 1e-10 * r.max(1.0), "{} vs {}", r, rc);
    prop_assert!(r == 0.0 || (1.0 - 1e-12..=beta.len() as f64 + 1e-9).contains(&r));
    Ok(())
}

pub fn check_monotone_filtering(features: &FeatureMatrix, q1: f64, q2: f64) -> Result<(), TestCaseError> {
    let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
    let low = build_coactivation_design(features, lo).unwrap();
    let high = build_coactivation_design(features, hi).unwrap();
    for pair in &high.retained {
        prop_assert!(low.retained.contains(pair), "{:?} kept at {} but not at {}", pair, hi, lo);
    }
    prop_assert_eq!(high.design.p(), 1 + features.d() + high.retained.len());
    Ok(())
}

/// Builds matches and tracks from random intervals, then checks that every
/// nonzero aggregated row sums to one.
pub fn check_row_normalization(intervals: &[(usize, usize, usize, usize)], scores: &[Vec<f64>]) -> Result<(), TestCaseError> {
    let tracks: Vec<AttributionTrack> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| AttributionTrack {
            sequence_id: format!("s{i:03}"),
            label: i % 2 == 0,
            scores: s.clone(),
        })
        .collect();
    let matches: Vec<MotifMatch> = intervals
        .iter()
        .map(|&(seq, motif, start, len)| {
            let seq = seq % tracks.len();
            let track_len = tracks[seq].scores.len();
            let start = start % track_len;
            MotifMatch {
                sequence_id: tracks[seq].sequence_id.clone(),
                motif_id: format!("M{motif}"),
                start,
                end: (start + 1 + len).min(track_len),
                p_value: 1e-5,
                strand: Strand::Unspecified,
            }
        })
        .collect();
    let agg = aggregate_motif_scores(&matches, &tracks).unwrap();
    for row in agg.features.values().row_iter() {
        let sum = row.sum();
        prop_assert!(sum == 0.0 || (sum - 1.0).abs() <= 1e-12, "row sum {}", sum);
        prop_assert!(row.iter().all(|&v| v >= 0.0));
    }
    Ok(())
}

pub fn check_rank_permutation(beta: &[f64], perm_seed: u64) -> Result<(), TestCaseError> {
    let p = beta.len();
    let cols = linear_columns(p);
    // Permute the non-intercept columns with a simple deterministic shuffle.
    let mut order: Vec<usize> = (1..p).collect();
    let mut state = perm_seed | 1;
    for i in (1..order.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        order.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let mut perm = vec![0];
    perm.extend(order);
    let pbeta: Vec<f64> = perm.iter().map(|&j| beta[j]).collect();
    let pcols: Vec<EffectColumn> = perm.iter().map(|&j| cols[j].clone()).collect();
    let a = rank_effects(beta, &cols, p);
    let b = rank_effects(&pbeta, &pcols, p);
    // With distinct magnitudes the labels come out in the same order.
    let mut mags: Vec<f64> = beta[1..].iter().map(|b| b.abs()).collect();
    mags.sort_by(f64::total_cmp);
    if mags.windows(2).all(|w| w[0] < w[1]) {
        let la: Vec<&str> = a.iter().map(|e| e.label.as_str()).collect();
        let lb: Vec<&str> = b.iter().map(|e| e.label.as_str()).collect();
        prop_assert_eq!(la, lb);
    }
    prop_assert!(a.windows(2).all(|w| w[0].coefficient.abs() >= w[1].coefficient.abs()));
    prop_assert!(a.iter().all(|e| e.label != baggls::model::INTERCEPT_LABEL));
    Ok(())
}

pub fn check_predict_monotone(beta: &[f64], row: &[f64], bump: f64) -> Result<(), TestCaseError> {
    // Raising the linear predictor never lowers the probability.
    let p0 = predict_prob(beta, row);
    let mut shifted = beta.to_vec();
    shifted[0] += bump.abs();
    let mut ones_row = row.to_vec();
    ones_row[0] = 1.0;
    let base = predict_prob(beta, &ones_row);
    let up = predict_prob(&shifted, &ones_row);
    prop_assert!(up >= base);
    prop_assert!((0.0..=1.0).contains(&p0));
    Ok(())
}

/// Runs a few sweeps on a random problem and checks `σ²(z_i) > 1` after
/// each one.
pub fn check_latent_variance_exceeds_one(features: &FeatureMatrix, labels: &[bool], cross: bool) -> Result<(), TestCaseError> {
    let (design, indicator) = build_design(features, &DesignOptions::default()).unwrap();
    let response = BinaryResponse::from_bools(labels.to_vec());
    let cfg = FitConfig {
        delta_cross_term: cross,
        ..FitConfig::default()
    };
    let mut engine = ViEngine::new(&design, &indicator, &response, cfg).unwrap();
    let mut state = engine.init_state().unwrap();
    for _ in 0..5 {
        engine.sweep(&mut state).unwrap();
        for i in 0..state.n() {
            prop_assert!(state.var_z[i] > 1.0, "σ²(z_{}) = {}", i, state.var_z[i]);
            prop_assert!(response.sign(i) * (state.ez[i] - state.mu_z[i]) > 0.0);
        }
    }
    Ok(())
}

pub fn problem_with_labels(max_n: usize, max_d: usize) -> impl Strategy<Value = (FeatureMatrix, Vec<bool>)> {
    feature_matrix(max_n, max_d)
        .prop_flat_map(|f| {
            let n = f.n();
            (Just(f), prop::collection::vec(any::<bool>(), n))
        })
        .prop_filter("both classes", |(_, y)| y.iter().any(|&v| v) && y.iter().any(|&v| !v))
}

pub fn interval_case() -> impl Strategy<Value = (Vec<(usize, usize, usize, usize)>, Vec<Vec<f64>>)> {
    (
        prop::collection::vec((0usize..20, 0usize..6, 0usize..40, 0usize..8), 1..40),
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..40), 1..12),
    )
}

// ---------------------------------------------------------------------------
// Synthetic motif corpus.

/// Motif identifiers of the two planted motifs.
pub const PLANTED: [&str; 2] = ["PLANTED_A", "PLANTED_B"];
const BACKGROUND_MOTIFS: usize = 6;
const SEQUENCE_LENGTH: usize = 200;
const MOTIF_WIDTH: usize = 10;

/// FIMO-format match table and CSV attribution tracks for a corpus of
/// `n` sequences, half of them positive.
///
/// Positives carry both planted motifs with attribution concentrated on
/// their positions. Negatives carry at most one planted motif, except for a
/// tenth that carry both with background-level attribution. Background
/// motifs occur at random in every sequence with low attribution.
pub struct MotifCorpus {
    pub fimo: String,
    pub tracks: String,
}

pub fn synthetic_motif_corpus(n: usize, seed: u64) -> MotifCorpus {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    use std::fmt::Write;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let strong = Normal::new(1.5, 0.3).unwrap();
    let mut fimo = String::from(
        "motif_id\tmotif_alt_id\tsequence_name\tstart\tstop\tstrand\tscore\tp-value\tq-value\tmatched_sequence\n",
    );
    let mut tracks = String::from("sequence_id,label");
    for k in 0..SEQUENCE_LENGTH {
        write!(tracks, ",pos{k}").unwrap();
    }
    tracks.push('\n');

    for i in 0..n {
        let id = format!("seq{i:04}");
        let positive = i % 2 == 0;
        let mut scores: Vec<f64> = (0..SEQUENCE_LENGTH).map(|_| noise.sample(&mut rng)).collect();
        let hit = |motif: &str, boost: bool, scores: &mut Vec<f64>, rng: &mut rand_chacha::ChaCha8Rng, fimo: &mut String| {
            let start = rng.random_range(0..SEQUENCE_LENGTH - MOTIF_WIDTH);
            if boost {
                for s in &mut scores[start..start + MOTIF_WIDTH] {
                    *s = strong.sample(rng) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            let strand = if rng.random::<bool>() { "+" } else { "-" };
            let p_value = 10f64.powf(-rng.random_range(4.2..7.0));
            writeln!(
                fimo,
                "{motif}\t\t{id}\t{}\t{}\t{strand}\t12.5\t{p_value:.3e}\t0.01\tACGTACGTAC",
                start + 1,
                start + MOTIF_WIDTH
            )
            .unwrap();
        };
        let (has_a, has_b, boosted) = if positive {
            (true, true, true)
        } else if rng.random::<f64>() < 0.1 {
            (true, true, false)
        } else {
            match rng.random_range(0..3) {
                0 => (true, false, true),
                1 => (false, true, true),
                _ => (false, false, false),
            }
        };
        if has_a {
            hit(PLANTED[0], boosted, &mut scores, &mut rng, &mut fimo);
        }
        if has_b {
            hit(PLANTED[1], boosted, &mut scores, &mut rng, &mut fimo);
        }
        for m in 0..BACKGROUND_MOTIFS {
            if rng.random::<f64>() < 0.5 {
                hit(&format!("BG{m}"), false, &mut scores, &mut rng, &mut fimo);
            }
        }
        // A weak match just above the significance threshold is dropped.
        writeln!(fimo, "BG0\t\t{id}\t5\t14\t+\t3.1\t2.0e-4\t0.5\tACGTACGTAC").unwrap();
        write!(tracks, "{id},{}", u8::from(positive)).unwrap();
        for s in &scores {
            write!(tracks, ",{s:.6}").unwrap();
        }
        tracks.push('\n');
    }
    MotifCorpus { fimo, tracks }
}
