//! Data-augmentation Gibbs sampler for the same probit model and
//! overlapping-group horseshoe prior, used as an exact-inference reference
//! at small scale.
//!
//! Full conditionals, with `P_j = ∏_{l ∈ G_j} δ_l` and `G_j` the features of
//! effect `j`:
//!
//! ```text
//! z_i   | β    ~ N(x_iᵀβ, 1) truncated to the side of y_i
//! β     | z, · ~ N(Q⁻¹Xᵀz, Q⁻¹),  Q = XᵀX + diag(1 / (τ λ_j P_j))
//! λ_j   | ·    ~ IG(1, 1/c_j + β_j² / (2 τ P_j))
//! c_j   | λ_j  ~ IG(1, 1 + 1/λ_j)
//! τ     | ·    ~ IG((p+1)/2, 1/ν + ½ Σ_j β_j² / (λ_j P_j))
//! ν     | τ    ~ IG(1, 1 + 1/τ)
//! δ_l   | ·    ~ IG((|{j : l ∈ G_j}| + 1)/2,
//!                   1/t_l + ½ Σ_{j : l ∈ G_j} β_j² / (τ λ_j ∏_{l' ∈ G_j, l' ≠ l} δ_l'))
//! t_l   | δ_l  ~ IG(1, 1 + 1/δ_l)
//! ```
//!
//! `IG(a, b)` has shape `a` and scale `b`, density `∝ θ^{-a-1} e^{-b/θ}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::model::{BinaryResponse, DesignMatrix, IndicatorMatrix};
use crate::normal::sample_truncated;

/// Refuse designs wider than this.
pub const MAX_ORACLE_COLUMNS: usize = 500;

/// Scale parameters are clamped to this range to keep `Q` representable.
const VARIANCE_CLAMP: (f64, f64) = (1e-150, 1e150);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GibbsResult {
    /// Mean of the post-burn-in draws of β.
    pub mean: DVector<f64>,
    /// `(iterations - burn_in) × p` draws.
    pub draws: DMatrix<f64>,
    /// Smallest value any variance parameter took during the run.
    pub min_variance_parameter: f64,
}

/// Draws from `IG(shape, scale)`.
pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive shape and scale");
    1.0 / g.sample(rng)
}

/// Current values of all sampled parameters.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub z: DVector<f64>,
    pub beta: DVector<f64>,
    pub tau: f64,
    pub nu: f64,
    pub lambda: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: Vec<f64>,
}

impl GibbsState {
    fn variance_parameters(&self) -> impl Iterator<Item = f64> + '_ {
        [self.tau, self.nu]
            .into_iter()
            .chain(self.lambda.iter().copied())
            .chain(self.c.iter().copied())
            .chain(self.delta.iter().copied())
            .chain(self.t.iter().copied())
    }
}

pub struct GibbsSampler<'a> {
    x: &'a DMatrix<f64>,
    indicator: &'a IndicatorMatrix,
    labels: Vec<f64>,
    xtx: DMatrix<f64>,
    members: Vec<Vec<usize>>,
    pub state: GibbsState,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        indicator: &'a IndicatorMatrix,
        response: &BinaryResponse,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if p > MAX_ORACLE_COLUMNS {
            return Err(Error::invalid(format!(
                "Gibbs oracle is limited to {MAX_ORACLE_COLUMNS} columns, got {p}"
            )));
        }
        if indicator.p() != p || response.len() != n {
            return Err(Error::invalid(format!(
                "design {n}x{p}, indicator {} rows and {} labels do not agree",
                indicator.p(),
                response.len()
            )));
        }
        let d = indicator.d();
        let mut members = vec![Vec::new(); d];
        for j in 0..p {
            for &l in indicator.groups_of(j) {
                members[l].push(j);
            }
        }
        let labels: Vec<f64> = (0..n).map(|i| response.sign(i)).collect();
        Ok(Self {
            x,
            indicator,
            xtx: x.transpose() * x,
            members,
            state: GibbsState {
                z: DVector::from_iterator(n, labels.iter().map(|s| 0.8 * s)),
                beta: DVector::zeros(p),
                tau: 1.0,
                nu: 1.0,
                lambda: vec![1.0; p],
                c: vec![1.0; p],
                delta: vec![1.0; d],
                t: vec![1.0; d],
            },
            labels,
        })
    }

    /// Replaces the observed labels, e.g. when resimulating data.
    pub fn set_labels(&mut self, response: &BinaryResponse) {
        self.labels = (0..response.len()).map(|i| response.sign(i)).collect();
    }

    fn group_product(&self, j: usize, skip: Option<usize>) -> f64 {
        self.indicator
            .groups_of(j)
            .iter()
            .filter(|&&l| Some(l) != skip)
            .map(|&l| self.state.delta[l])
            .product()
    }

    /// One full scan over all blocks.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (n, p) = self.x.shape();
        let eta = self.x * &self.state.beta;
        for i in 0..n {
            self.state.z[i] = sample_truncated(rng, eta[i], 1.0, self.labels[i]);
        }

        let mut q = self.xtx.clone();
        for j in 0..p {
            let var = self.state.tau * self.state.lambda[j] * self.group_product(j, None);
            q[(j, j)] += 1.0 / var.clamp(VARIANCE_CLAMP.0, VARIANCE_CLAMP.1);
        }
        let chol = cholesky_with_jitter(&q, 1e-10)?;
        let mean = chol.solve(&(self.x.transpose() * &self.state.z));
        let eps = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
        let noise = chol
            .l_dirty()
            .tr_solve_lower_triangular(&eps)
            .ok_or_else(|| Error::numerical("singular Cholesky factor in β draw"))?;
        self.state.beta = mean + noise;

        let clamp = |v: f64| v.clamp(VARIANCE_CLAMP.0, VARIANCE_CLAMP.1);
        let beta_sq: Vec<f64> = self.state.beta.iter().map(|b| b * b).collect();

        for j in 0..p {
            let prod = self.group_product(j, None);
            let scale = 1.0 / self.state.c[j] + beta_sq[j] / (2.0 * self.state.tau * prod);
            self.state.lambda[j] = clamp(sample_inv_gamma(rng, 1.0, scale));
            self.state.c[j] = clamp(sample_inv_gamma(rng, 1.0, 1.0 + 1.0 / self.state.lambda[j]));
        }

        let weighted: f64 = (0..p)
            .map(|j| beta_sq[j] / (self.state.lambda[j] * self.group_product(j, None)))
            .sum();
        self.state.tau = clamp(sample_inv_gamma(
            rng,
            (p as f64 + 1.0) / 2.0,
            1.0 / self.state.nu + 0.5 * weighted,
        ));
        self.state.nu = clamp(sample_inv_gamma(rng, 1.0, 1.0 + 1.0 / self.state.tau));

        for l in 0..self.members.len() {
            let sum: f64 = self.members[l]
                .iter()
                .map(|&j| {
                    beta_sq[j] / (self.state.tau * self.state.lambda[j] * self.group_product(j, Some(l)))
                })
                .sum();
            let shape = (self.members[l].len() as f64 + 1.0) / 2.0;
            self.state.delta[l] =
                clamp(sample_inv_gamma(rng, shape, 1.0 / self.state.t[l] + 0.5 * sum));
            self.state.t[l] = clamp(sample_inv_gamma(rng, 1.0, 1.0 + 1.0 / self.state.delta[l]));
        }
        Ok(())
    }

    pub fn run(&mut self, config: &GibbsConfig) -> Result<GibbsResult> {
        validate_config(config)?;
        let p = self.x.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let kept = config.iterations - config.burn_in;
        let mut draws = DMatrix::zeros(kept, p);
        let mut min_var = f64::INFINITY;
        for it in 0..config.iterations {
            self.step(&mut rng)?;
            min_var = self.state.variance_parameters().fold(min_var, f64::min);
            if it >= config.burn_in {
                draws
                    .row_mut(it - config.burn_in)
                    .copy_from(&self.state.beta.transpose());
            }
        }
        let mean = DVector::from_iterator(p, draws.column_iter().map(|c| c.mean()));
        Ok(GibbsResult {
            mean,
            draws,
            min_variance_parameter: min_var,
        })
    }
}

fn validate_config(config: &GibbsConfig) -> Result<()> {
    if config.iterations <= config.burn_in {
        return Err(Error::invalid(format!(
            "iterations ({}) must exceed burn-in ({})",
            config.iterations, config.burn_in
        )));
    }
    Ok(())
}

/// Runs the sampler on a design and returns the post-burn-in mean and draws.
pub fn gibbs_fit(
    design: &DesignMatrix,
    indicator: &IndicatorMatrix,
    response: &BinaryResponse,
    config: &GibbsConfig,
) -> Result<GibbsResult> {
    validate_config(config)?;
    response.ensure_both_classes()?;
    GibbsSampler::new(design.values(), indicator, response)?.run(config)
}

/// Draws β from the prior by forward simulation of the hierarchy.
pub fn sample_prior_beta<R: Rng + ?Sized>(rng: &mut R, indicator: &IndicatorMatrix) -> DVector<f64> {
    let nu = sample_inv_gamma(rng, 0.5, 1.0);
    let tau = sample_inv_gamma(rng, 0.5, 1.0 / nu);
    let delta: Vec<f64> = (0..indicator.d())
        .map(|_| {
            let t = sample_inv_gamma(rng, 0.5, 1.0);
            sample_inv_gamma(rng, 0.5, 1.0 / t)
        })
        .collect();
    DVector::from_iterator(
        indicator.p(),
        (0..indicator.p()).map(|j| {
            let c = sample_inv_gamma(rng, 0.5, 1.0);
            let lambda = sample_inv_gamma(rng, 0.5, 1.0 / c);
            let prod: f64 = indicator.groups_of(j).iter().map(|&l| delta[l]).product();
            let z: f64 = StandardNormal.sample(rng);
            z * (tau * lambda * prod).sqrt()
        }),
    )
}
