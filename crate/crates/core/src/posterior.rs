//! Point estimates, draws, predictions and effect rankings from a fitted
//! variational state.
//!
//! Draws from `q(β)` are approximate: the variational family does not give
//! exact posterior uncertainty.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BinaryResponse, DesignMatrix, EffectColumn};
use crate::normal::{cdf, sample_truncated};
use crate::vi::{PrecisionFactor, VariationalState};

/// `β̂ = B(β) E[z]`.
pub fn posterior_mean(state: &VariationalState) -> DVector<f64> {
    &state.b_beta * &state.ez
}

/// Draws `count` vectors from `q(β) = ∫ q(β | z) q(z) dz`: each `z_i` from
/// its truncated normal, then `β ~ N(B z, Σ)`. When the state was computed
/// through the Woodbury path the Gaussian step is done in n dimensions.
/// Returns a `count × p` matrix.
pub fn sample_beta(
    state: &VariationalState,
    design: &DesignMatrix,
    response: &BinaryResponse,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let (n, p) = (state.n(), state.p());
    if design.n() != n || design.p() != p || response.len() != n {
        return Err(Error::invalid(format!(
            "state is {n}x{p} but design is {}x{} with {} labels",
            design.n(),
            design.p(),
            response.len()
        )));
    }
    let x = design.values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = DMatrix::zeros(count, p);
    let mut z = DVector::zeros(n);
    for s in 0..count {
        for i in 0..n {
            z[i] = sample_truncated(&mut rng, state.mu_z[i], state.var_z[i], response.sign(i));
        }
        let beta = match &state.factor {
            PrecisionFactor::Direct(chol) => {
                // Lᵀ e = ε gives e ~ N(0, (L Lᵀ)⁻¹).
                let eps = standard_normal_vector(&mut rng, p);
                let noise = chol
                    .l_dirty()
                    .tr_solve_lower_triangular(&eps)
                    .ok_or_else(|| Error::numerical("singular Cholesky factor while sampling"))?;
                &state.b_beta * &z + noise
            }
            PrecisionFactor::Woodbury(chol) => {
                let dinv = state.prior_precision.map(|v| 1.0 / v);
                let u = standard_normal_vector(&mut rng, p).component_mul(&dinv.map(f64::sqrt));
                let v = x * &u + standard_normal_vector(&mut rng, n);
                let w = chol.solve(&(&z - v));
                u + (x.transpose() * w).component_mul(&dinv)
            }
        };
        draws.row_mut(s).copy_from(&beta.transpose());
    }
    Ok(draws)
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

/// `Φ(xᵀβ̂)`.
pub fn predict_prob(beta_hat: &[f64], row: &[f64]) -> f64 {
    debug_assert_eq!(beta_hat.len(), row.len());
    let eta: f64 = beta_hat.iter().zip(row).map(|(b, x)| b * x).sum();
    cdf(eta)
}

/// Predicted probabilities for every row of a design.
pub fn predict_design(beta_hat: &DVector<f64>, design: &DesignMatrix) -> Vec<f64> {
    (design.values() * beta_hat).iter().map(|&eta| cdf(eta)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEffect {
    pub rank: usize,
    pub index: usize,
    pub label: String,
    pub coefficient: f64,
}

/// Top-`k` effects by `|β̂_j|`, intercept excluded, ties broken by column
/// index. `k` larger than the number of non-intercept effects is truncated.
pub fn rank_effects(beta_hat: &[f64], columns: &[EffectColumn], k: usize) -> Vec<RankedEffect> {
    let mut order: Vec<usize> = (0..columns.len())
        .filter(|&j| !columns[j].is_intercept())
        .collect();
    order.sort_by(|&a, &b| {
        beta_hat[b]
            .abs()
            .total_cmp(&beta_hat[a].abs())
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, j)| RankedEffect {
            rank: r + 1,
            index: j,
            label: columns[j].label.clone(),
            coefficient: beta_hat[j],
        })
        .collect()
}
