//! Shared domain types: raw features, the expanded effect design, the
//! effect-to-feature indicator matrix, binary responses and fit summaries.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed features, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() != names.len() {
            return Err(Error::invalid(format!(
                "feature matrix has {} columns but {} names",
                values.ncols(),
                names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::invalid(format!(
                "non-finite feature value at row {r}, column {c}"
            )));
        }
        ensure_unique(&names, "feature names")?;
        Ok(Self { values, names })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectKind {
    Intercept,
    Linear(usize),
    /// Product of features `.0 < .1`.
    Interaction(usize, usize),
}

impl EffectKind {
    /// Feature indices that contribute to the effect.
    pub fn features(&self) -> Vec<usize> {
        match *self {
            EffectKind::Intercept => vec![],
            EffectKind::Linear(l) => vec![l],
            EffectKind::Interaction(a, b) => vec![a, b],
        }
    }
}

/// Metadata for one column of the design matrix.
///
/// Raw values are transformed as `(raw - center) / scale`; `center` is zero
/// unless centering was requested when the design was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectColumn {
    pub kind: EffectKind,
    pub label: String,
    pub center: f64,
    pub scale: f64,
}

impl EffectColumn {
    pub fn intercept() -> Self {
        Self {
            kind: EffectKind::Intercept,
            label: INTERCEPT_LABEL.to_string(),
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.kind == EffectKind::Intercept
    }
}

pub const INTERCEPT_LABEL: &str = "(intercept)";

/// Expanded effect matrix `X` (n × p) together with per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    columns: Vec<EffectColumn>,
}

impl DesignMatrix {
    /// Validates the structural invariants: one intercept of ones, ordered
    /// interaction indices, positive scales and unique labels.
    pub fn new(values: DMatrix<f64>, columns: Vec<EffectColumn>) -> Result<Self> {
        if values.ncols() != columns.len() {
            return Err(Error::invalid(format!(
                "design has {} columns but {} column descriptors",
                values.ncols(),
                columns.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::invalid("design has no rows"));
        }
        let intercepts: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_intercept())
            .map(|(j, _)| j)
            .collect();
        if intercepts.len() != 1 {
            return Err(Error::invalid(format!(
                "design must contain exactly one intercept column, found {}",
                intercepts.len()
            )));
        }
        let ic = intercepts[0];
        if values.column(ic).iter().any(|&v| v != 1.0) {
            return Err(Error::invalid("intercept column entries must all equal 1"));
        }
        for col in &columns {
            if !(col.scale > 0.0 && col.scale.is_finite()) || !col.center.is_finite() {
                return Err(Error::invalid(format!(
                    "column {} has invalid scale {} or center {}",
                    col.label, col.scale, col.center
                )));
            }
            match col.kind {
                EffectKind::Intercept if col.scale != 1.0 || col.center != 0.0 => {
                    return Err(Error::invalid("intercept column must have scale 1 and center 0"));
                }
                EffectKind::Interaction(a, b) if a >= b => {
                    return Err(Error::invalid(format!(
                        "interaction {} has unordered feature indices ({a}, {b})",
                        col.label
                    )));
                }
                _ => {}
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design contains non-finite values"));
        }
        let labels: Vec<String> = columns.iter().map(|c| c.label.clone()).collect();
        ensure_unique(&labels, "column labels")?;
        Ok(Self { values, columns })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn columns(&self) -> &[EffectColumn] {
        &self.columns
    }

    pub fn labels(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.label.clone()).collect()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn intercept_index(&self) -> usize {
        self.columns
            .iter()
            .position(EffectColumn::is_intercept)
            .expect("validated on construction")
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.label == label)
    }
}

/// Binary membership matrix `J` (p × d): entry `(j, l)` is set when feature
/// `l` contributes to effect `j`. Stored sparsely as per-effect feature lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    rows: Vec<Vec<usize>>,
    d: usize,
}

impl IndicatorMatrix {
    pub fn from_columns(columns: &[EffectColumn], d: usize) -> Result<Self> {
        let rows: Vec<Vec<usize>> = columns.iter().map(|c| c.kind.features()).collect();
        if let Some(l) = rows.iter().flatten().find(|&&l| l >= d) {
            return Err(Error::invalid(format!(
                "effect references feature {l} but only {d} features exist"
            )));
        }
        Ok(Self { rows, d })
    }

    /// Builds `J` from a dense 0/1 table, checking it against the column kinds.
    pub fn from_dense(entries: &[Vec<u8>], columns: &[EffectColumn]) -> Result<Self> {
        if entries.len() != columns.len() {
            return Err(Error::invalid(format!(
                "indicator has {} rows but design has {} columns",
                entries.len(),
                columns.len()
            )));
        }
        let d = entries.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(entries.len());
        for (j, (row, col)) in entries.iter().zip(columns).enumerate() {
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "indicator row {j} has {} entries, expected {d}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::invalid(format!("indicator row {j} is not binary")));
            }
            let members: Vec<usize> = (0..d).filter(|&l| row[l] == 1).collect();
            if members != col.kind.features() {
                return Err(Error::invalid(format!(
                    "indicator row {j} ({}) does not match its effect kind",
                    col.label
                )));
            }
            rows.push(members);
        }
        Ok(Self { rows, d })
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Features belonging to effect `j`.
    pub fn groups_of(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    pub fn get(&self, j: usize, l: usize) -> bool {
        self.rows[j].contains(&l)
    }

    /// `Σ_j J_jl` for every feature `l`.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.d];
        for &l in self.rows.iter().flatten() {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row sums of `J`.
    pub fn row_sums(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn to_dense(&self) -> DMatrix<u8> {
        let mut m = DMatrix::zeros(self.rows.len(), self.d);
        for (j, row) in self.rows.iter().enumerate() {
            for &l in row {
                m[(j, l)] = 1;
            }
        }
        m
    }

    pub(crate) fn select(&self, keep: &[usize]) -> Self {
        Self {
            rows: keep.iter().map(|&j| self.rows[j].clone()).collect(),
            d: self.d,
        }
    }
}

/// Observed 0/1 labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryResponse {
    labels: Vec<bool>,
}

impl BinaryResponse {
    pub fn from_u8(values: &[u8]) -> Result<Self> {
        let labels = values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::invalid(format!("response entry {i} is {v}, expected 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { labels })
    }

    pub fn from_bools(labels: Vec<bool>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `2y - 1`.
    pub fn sign(&self, i: usize) -> f64 {
        if self.labels[i] {
            1.0
        } else {
            -1.0
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    /// Fitting needs both classes present.
    pub fn ensure_both_classes(&self) -> Result<()> {
        let pos = self.positives();
        if pos == 0 || pos == self.labels.len() {
            return Err(Error::invalid(format!(
                "response must contain both classes (found {pos} ones out of {})",
                self.labels.len()
            )));
        }
        Ok(())
    }
}

/// Summary of a variational fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub column_labels: Vec<String>,
    pub sweeps_used: usize,
    pub final_delta: f64,
    /// Max-norm change of `β̂` after each sweep.
    pub delta_history: Vec<f64>,
    pub elapsed_seconds: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

fn ensure_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::invalid(format!("duplicate entry {item:?} in {what}")));
        }
    }
    Ok(())
}
