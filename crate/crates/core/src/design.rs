//! Expansion of raw features into an intercept + linear + pairwise-interaction
//! design, column standardization and column subsetting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, EffectColumn, EffectKind, FeatureMatrix, IndicatorMatrix};

/// Columns whose sample standard deviation falls below this are left unscaled.
pub const CONSTANT_STD_THRESHOLD: f64 = 1e-12;

pub const DEFAULT_MAX_COLUMNS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub include_interactions: bool,
    /// Subtract column means before scaling. Off by default: interactions are
    /// products of raw nonnegative features.
    pub center: bool,
    pub max_columns: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            include_interactions: true,
            center: false,
            max_columns: DEFAULT_MAX_COLUMNS,
        }
    }
}

/// Output of [`standardize_columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: DMatrix<f64>,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

/// Number of effect columns for `d` features.
pub fn effect_count(d: usize, include_interactions: bool) -> Option<usize> {
    let pairs = if include_interactions {
        d.checked_mul(d.saturating_sub(1))? / 2
    } else {
        0
    };
    1usize.checked_add(d)?.checked_add(pairs)
}

/// Intercept, linear effects in feature order, then interactions in
/// lexicographic `(l, l')` order.
pub fn pairwise_kinds(d: usize, include_interactions: bool) -> Vec<EffectKind> {
    let mut kinds = Vec::with_capacity(effect_count(d, include_interactions).unwrap_or(0));
    kinds.push(EffectKind::Intercept);
    kinds.extend((0..d).map(EffectKind::Linear));
    if include_interactions {
        for a in 0..d {
            for b in (a + 1)..d {
                kinds.push(EffectKind::Interaction(a, b));
            }
        }
    }
    kinds
}

pub fn build_pairwise_design(
    features: &FeatureMatrix,
    include_interactions: bool,
) -> Result<(DesignMatrix, IndicatorMatrix)> {
    build_design(
        features,
        &DesignOptions {
            include_interactions,
            ..DesignOptions::default()
        },
    )
}

pub fn build_design(
    features: &FeatureMatrix,
    options: &DesignOptions,
) -> Result<(DesignMatrix, IndicatorMatrix)> {
    let requested = effect_count(features.d(), options.include_interactions).ok_or(
        Error::DimensionOverflow {
            requested: usize::MAX,
            max: options.max_columns,
        },
    )?;
    if requested > options.max_columns {
        return Err(Error::DimensionOverflow {
            requested,
            max: options.max_columns,
        });
    }
    let kinds = pairwise_kinds(features.d(), options.include_interactions);
    build_design_from_kinds(features, &kinds, options.center)
}

/// Builds and standardizes the raw columns for an explicit list of effects.
pub fn build_design_from_kinds(
    features: &FeatureMatrix,
    kinds: &[EffectKind],
    center: bool,
) -> Result<(DesignMatrix, IndicatorMatrix)> {
    if features.n() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 observations to standardize, got {}",
            features.n()
        )));
    }
    if features.d() < 1 {
        return Err(Error::invalid("need at least one feature"));
    }
    let raw = raw_columns(features.values(), kinds)?;
    let std = standardize_columns(&raw, kinds, center)?;
    let columns = kinds
        .iter()
        .zip(std.centers.iter().zip(&std.scales))
        .map(|(&kind, (&center, &scale))| EffectColumn {
            kind,
            label: effect_label(kind, features.names()),
            center,
            scale,
        })
        .collect::<Vec<_>>();
    let indicator = IndicatorMatrix::from_columns(&columns, features.d())?;
    let design = DesignMatrix::new(std.values, columns)?;
    Ok((design, indicator))
}

/// Applies an existing design's column transforms to new feature rows, e.g.
/// to evaluate a hold-out set on the training scale.
pub fn apply_design(features: &FeatureMatrix, columns: &[EffectColumn]) -> Result<DesignMatrix> {
    let kinds: Vec<EffectKind> = columns.iter().map(|c| c.kind).collect();
    let mut raw = raw_columns(features.values(), &kinds)?;
    for (j, col) in columns.iter().enumerate() {
        if !col.is_intercept() {
            raw.column_mut(j)
                .apply(|v| *v = (*v - col.center) / col.scale);
        }
    }
    DesignMatrix::new(raw, columns.to_vec())
}

pub fn effect_label(kind: EffectKind, names: &[String]) -> String {
    match kind {
        EffectKind::Intercept => crate::model::INTERCEPT_LABEL.to_string(),
        EffectKind::Linear(l) => names[l].clone(),
        EffectKind::Interaction(a, b) => format!("{}:{}", names[a], names[b]),
    }
}

fn raw_columns(values: &DMatrix<f64>, kinds: &[EffectKind]) -> Result<DMatrix<f64>> {
    let (n, d) = values.shape();
    let mut raw = DMatrix::zeros(n, kinds.len());
    for (j, kind) in kinds.iter().enumerate() {
        let mut out = raw.column_mut(j);
        match *kind {
            EffectKind::Intercept => out.fill(1.0),
            EffectKind::Linear(l) if l < d => out.copy_from(&values.column(l)),
            EffectKind::Interaction(a, b) if a < b && b < d => {
                out.copy_from(&values.column(a).component_mul(&values.column(b)))
            }
            other => {
                return Err(Error::invalid(format!(
                    "effect {other:?} is invalid for {d} features"
                )))
            }
        }
    }
    Ok(raw)
}

/// Divides every non-intercept column by its sample standard deviation
/// (denominator `n - 1`). Constant columns are left unscaled and flagged.
pub fn standardize_columns(
    raw: &DMatrix<f64>,
    kinds: &[EffectKind],
    center: bool,
) -> Result<Standardized> {
    let (n, p) = raw.shape();
    if n < 2 {
        return Err(Error::invalid("standardization needs at least 2 rows"));
    }
    if kinds.len() != p {
        return Err(Error::invalid(format!(
            "{} column kinds supplied for {p} columns",
            kinds.len()
        )));
    }
    let mut values = raw.clone();
    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut constant = vec![false; p];
    for (j, kind) in kinds.iter().enumerate() {
        if *kind == EffectKind::Intercept {
            continue;
        }
        let mut col = values.column_mut(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if center {
            centers[j] = mean;
            col.add_scalar_mut(-mean);
        }
        if sd < CONSTANT_STD_THRESHOLD {
            constant[j] = true;
            continue;
        }
        scales[j] = sd;
        col.unscale_mut(sd);
    }
    Ok(Standardized {
        values,
        centers,
        scales,
        constant,
    })
}

/// Restricts a design to the listed columns, preserving their order.
pub fn subset_design(
    design: &DesignMatrix,
    indicator: &IndicatorMatrix,
    keep: &[usize],
) -> Result<(DesignMatrix, IndicatorMatrix)> {
    if !keep.contains(&design.intercept_index()) {
        return Err(Error::invalid("subset must keep the intercept column"));
    }
    if let Some(&j) = keep.iter().find(|&&j| j >= design.p()) {
        return Err(Error::invalid(format!(
            "column index {j} out of range for p = {}",
            design.p()
        )));
    }
    let values = design.values().select_columns(keep);
    let columns = keep.iter().map(|&j| design.columns()[j].clone()).collect();
    Ok((DesignMatrix::new(values, columns)?, indicator.select(keep)))
}

/// Sample standard deviation with denominator `n - 1`.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
