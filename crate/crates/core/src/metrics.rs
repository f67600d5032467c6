//! Coefficient-recovery and predictive metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EffectColumn;
use crate::posterior::rank_effects;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    /// Entries where the true coefficient is nonzero.
    Active,
    Inactive,
}

/// Root of the summed squared error over the selected entries (not divided
/// by the number of entries).
pub fn rmse(beta_hat: &[f64], beta_star: &[f64], subset: Subset) -> Result<f64> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::invalid(format!(
            "coefficient vectors differ in length ({} vs {})",
            beta_hat.len(),
            beta_star.len()
        )));
    }
    let mut any = false;
    let mut sum = 0.0;
    for (&est, &truth) in beta_hat.iter().zip(beta_star) {
        let keep = match subset {
            Subset::All => true,
            Subset::Active => truth != 0.0,
            Subset::Inactive => truth == 0.0,
        };
        if keep {
            any = true;
            sum += (truth - est).powi(2);
        }
    }
    if !any {
        return Err(Error::invalid(format!("{subset:?} subset is empty")));
    }
    Ok(sum.sqrt())
}

/// Mann–Whitney AUC; tied scores contribute ½.
pub fn auc(probabilities: &[f64], labels: &[bool]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::invalid("probabilities and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]));
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && probabilities[order[end]] == probabilities[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * positives as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn brier(probabilities: &[f64], labels: &[bool]) -> Result<f64> {
    if probabilities.len() != labels.len() || labels.is_empty() {
        return Err(Error::invalid("probabilities and labels must be non-empty and equal length"));
    }
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - if y { 1.0 } else { 0.0 }).powi(2))
        .sum();
    Ok(sum / labels.len() as f64)
}

/// `(Σ β_j²)² / Σ β_j⁴`; zero for the zero vector.
pub fn sparsity_ratio(beta: &[f64]) -> f64 {
    // Rescale by the max magnitude so the fourth powers cannot overflow.
    let max = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let (mut s2, mut s4) = (0.0, 0.0);
    for b in beta {
        let r = b / max;
        let r2 = r * r;
        s2 += r2;
        s4 += r2 * r2;
    }
    s2 * s2 / s4
}

/// Whether each target label is among the top `k` effects by `|β̂|`.
pub fn topk_recovery(
    beta_hat: &[f64],
    columns: &[EffectColumn],
    targets: &[&str],
    k: usize,
) -> Result<BTreeMap<String, bool>> {
    for t in targets {
        if !columns.iter().any(|c| c.label == *t) {
            return Err(Error::invalid(format!("unknown target label {t:?}")));
        }
    }
    let top = rank_effects(beta_hat, columns, k);
    Ok(targets
        .iter()
        .map(|t| (t.to_string(), top.iter().any(|e| e.label == *t)))
        .collect())
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
