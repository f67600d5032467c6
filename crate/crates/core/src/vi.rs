//! Coordinate-ascent variational inference under the partially factorized
//! family `q(β | z) ∏ q(z_i) q(τ) q(ν) ∏ q(λ_j) q(c_j) ∏ q(δ_l) q(t_l)`.
//!
//! `q(β | z)` is Gaussian with mean `B z` and covariance `Σ`, each `q(z_i)` is
//! a normal truncated to the side of the observed label and every scale
//! factor is inverse gamma. A sweep updates, in order, the Gaussian
//! conditional, the latent `z` factors (Gauss–Seidel over `i`), the second
//! moments `E[β_j²]` and the shrinkage factors.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, symmetrize};
use crate::model::{BinaryResponse, DesignMatrix, FitResult, IndicatorMatrix};
use crate::normal::truncated_mean;
use crate::posterior::posterior_mean;

/// Largest tolerated negative value of a computed `E[β_j²]` before it is
/// treated as a numerical failure rather than rounding.
const EBETA_SQ_NEGATIVE_TOL: f64 = -1e-10;

/// Inverse-gamma factor with shape `a` and rate `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGamma {
    pub shape: f64,
    pub rate: f64,
}

impl InvGamma {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    /// `E[1/θ] = a / b`.
    #[inline]
    pub fn recip_mean(&self) -> f64 {
        self.shape / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariancePath {
    /// Woodbury when `p > n`, direct otherwise.
    #[default]
    Auto,
    /// Invert the p × p precision directly.
    Direct,
    /// Solve through the n × n matrix `I + X D⁻¹ Xᵀ`.
    Woodbury,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_sweeps: usize,
    pub tol: f64,
    pub rate_floor: f64,
    pub jitter: f64,
    /// Use the conjugate form of the group-factor rate (½ factor and the
    /// product over the other groups of each effect) instead of the
    /// uncorrected form.
    pub delta_cross_term: bool,
    pub seed: u64,
    pub covariance_path: CovariancePath,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 1000,
            tol: 1e-6,
            rate_floor: 1e-12,
            jitter: 1e-10,
            delta_cross_term: false,
            seed: 0,
            covariance_path: CovariancePath::Auto,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.rate_floor > 0.0) {
            return Err(Error::invalid("rate_floor must be positive"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::invalid("jitter must be nonnegative"));
        }
        Ok(())
    }
}

/// Factorization kept from the last `Σ(β)` update, reused for sampling.
#[derive(Debug, Clone)]
pub(crate) enum PrecisionFactor {
    /// Cholesky of `XᵀX + D`.
    Direct(Cholesky<f64, Dyn>),
    /// Cholesky of `I + X D⁻¹ Xᵀ`.
    Woodbury(Cholesky<f64, Dyn>),
}

/// All variational parameters.
#[derive(Debug, Clone)]
pub struct VariationalState {
    /// `Σ(β) = (XᵀX + D)⁻¹`.
    pub sigma_beta: DMatrix<f64>,
    /// `B(β) = Σ(β) Xᵀ`, p × n.
    pub b_beta: DMatrix<f64>,
    pub mu_z: DVector<f64>,
    pub var_z: DVector<f64>,
    pub ez: DVector<f64>,
    pub ebeta_sq: DVector<f64>,
    pub tau: InvGamma,
    pub nu: InvGamma,
    pub lambda: Vec<InvGamma>,
    pub c: Vec<InvGamma>,
    pub delta: Vec<InvGamma>,
    pub t: Vec<InvGamma>,
    /// Diagonal `D` of the prior precision used for the current `Σ(β)`.
    pub prior_precision: DVector<f64>,
    /// `x_iᵀ Σ(β) x_i`.
    pub hat_diag: DVector<f64>,
    pub(crate) factor: PrecisionFactor,
}

impl VariationalState {
    pub fn n(&self) -> usize {
        self.ez.len()
    }

    pub fn p(&self) -> usize {
        self.ebeta_sq.len()
    }

    /// Per-effect prior precision `E[1/τ] E[1/λ_j] ∏_{l ∈ G_j} E[1/δ_l]`.
    pub fn precision_diagonal(&self, indicator: &IndicatorMatrix) -> DVector<f64> {
        let tau_r = self.tau.recip_mean();
        DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|j| {
                tau_r * self.lambda[j].recip_mean() * group_product(&self.delta, indicator.groups_of(j), None)
            }),
        )
    }

    /// Variance of each truncated-normal `q(z_i)`.
    pub fn z_variances(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| self.var_z[i] - (self.ez[i] - self.mu_z[i]) * self.ez[i]),
        )
    }
}

/// `∏ E[1/δ_l]` over `groups`, optionally skipping one feature.
fn group_product(delta: &[InvGamma], groups: &[usize], skip: Option<usize>) -> f64 {
    groups
        .iter()
        .filter(|&&l| Some(l) != skip)
        .map(|&l| delta[l].recip_mean())
        .product()
}

/// Binds a design, indicator and response for repeated coordinate updates.
pub struct ViEngine<'a> {
    design: &'a DesignMatrix,
    indicator: &'a IndicatorMatrix,
    response: &'a BinaryResponse,
    config: FitConfig,
    xt: DMatrix<f64>,
    xtx: Option<DMatrix<f64>>,
}

impl<'a> ViEngine<'a> {
    pub fn new(
        design: &'a DesignMatrix,
        indicator: &'a IndicatorMatrix,
        response: &'a BinaryResponse,
        config: FitConfig,
    ) -> Result<Self> {
        config.validate()?;
        if indicator.p() != design.p() {
            return Err(Error::invalid(format!(
                "indicator has {} rows but design has {} columns",
                indicator.p(),
                design.p()
            )));
        }
        if response.len() != design.n() {
            return Err(Error::invalid(format!(
                "response has {} entries but design has {} rows",
                response.len(),
                design.n()
            )));
        }
        response.ensure_both_classes()?;
        Ok(Self {
            design,
            indicator,
            response,
            config,
            xt: design.values().transpose(),
            xtx: None,
        })
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    fn use_woodbury(&self) -> bool {
        match self.config.covariance_path {
            CovariancePath::Auto => self.design.p() > self.design.n(),
            CovariancePath::Direct => false,
            CovariancePath::Woodbury => true,
        }
    }

    /// Every reciprocal mean starts at 1 and `E[z_i] = (2y_i - 1)√(2/π)`.
    pub fn init_state(&mut self) -> Result<VariationalState> {
        let (n, p) = (self.design.n(), self.design.p());
        let half_normal = (2.0 / std::f64::consts::PI).sqrt();
        let same = |a: f64| InvGamma::new(a, a);
        let tau = same((p as f64 + 1.0) / 2.0);
        let delta = self
            .indicator
            .group_sizes()
            .iter()
            .map(|&s| same((s as f64 + 1.0) / 2.0))
            .collect();
        let mut state = VariationalState {
            sigma_beta: DMatrix::zeros(0, 0),
            b_beta: DMatrix::zeros(0, 0),
            mu_z: DVector::zeros(n),
            var_z: DVector::from_element(n, 1.0),
            ez: DVector::from_iterator(n, (0..n).map(|i| self.response.sign(i) * half_normal)),
            ebeta_sq: DVector::zeros(p),
            tau,
            nu: same(1.0),
            lambda: vec![same(1.0); p],
            c: vec![same(1.0); p],
            delta,
            t: vec![same(1.0); self.indicator.d()],
            prior_precision: DVector::from_element(p, 1.0),
            hat_diag: DVector::zeros(n),
            factor: PrecisionFactor::Direct(
                Cholesky::new(DMatrix::identity(1, 1)).expect("identity is positive definite"),
            ),
        };
        self.update_beta_conditional(&mut state)?;
        for i in 0..n {
            state.var_z[i] = 1.0 / (1.0 - state.hat_diag[i]);
        }
        self.update_ebeta_sq(&mut state)?;
        Ok(state)
    }

    /// Recomputes `Σ(β)`, `B(β)` and the hat diagonal from the current
    /// shrinkage factors.
    pub fn update_beta_conditional(&mut self, state: &mut VariationalState) -> Result<()> {
        let dvec = state.precision_diagonal(self.indicator);
        let cond = if self.use_woodbury() {
            woodbury_conditional(self.design.values(), &dvec, self.config.jitter)?
        } else {
            if self.xtx.is_none() {
                self.xtx = Some(&self.xt * self.design.values());
            }
            direct_conditional(
                self.xtx.as_ref().expect("just set"),
                &self.xt,
                &dvec,
                self.config.jitter,
            )?
        };
        state.hat_diag = hat_diagonal(&self.xt, &cond.b)?;
        state.sigma_beta = cond.sigma;
        state.b_beta = cond.b;
        state.factor = cond.factor;
        state.prior_precision = dvec;
        Ok(())
    }

    /// Leave-one-out update of each `q(z_i)` in index order with the freshest
    /// values of the others.
    pub fn update_z(&self, state: &mut VariationalState) -> Result<()> {
        let n = self.design.n();
        // v = B E[z], so x_iᵀ v = Σ_k H_ik E[z_k].
        let mut v = &state.b_beta * &state.ez;
        for i in 0..n {
            let h = state.hat_diag[i];
            let var = 1.0 / (1.0 - h);
            let loo = self.xt.column(i).dot(&v) - h * state.ez[i];
            let mu = var * loo;
            let ez = truncated_mean(mu, var, self.response.sign(i));
            if !ez.is_finite() {
                return Err(Error::numerical(format!(
                    "E[z_{i}] is not finite (mu = {mu}, var = {var})"
                )));
            }
            let change = ez - state.ez[i];
            if change != 0.0 {
                v.axpy(change, &state.b_beta.column(i), 1.0);
            }
            state.mu_z[i] = mu;
            state.var_z[i] = var;
            state.ez[i] = ez;
        }
        Ok(())
    }

    pub fn update_ebeta_sq(&self, state: &mut VariationalState) -> Result<()> {
        state.ebeta_sq = second_moments(
            &state.sigma_beta,
            &state.b_beta,
            &state.mu_z,
            &state.var_z,
            &state.ez,
        )?;
        Ok(())
    }

    /// Closed-form updates of the τ, ν, λ, c, δ and t factors, in that order.
    pub fn update_shrinkage(&self, state: &mut VariationalState) {
        update_shrinkage(state, self.indicator, &self.config);
    }

    /// One full sweep.
    pub fn sweep(&mut self, state: &mut VariationalState) -> Result<()> {
        self.update_beta_conditional(state)?;
        self.update_z(state)?;
        self.update_ebeta_sq(state)?;
        self.update_shrinkage(state);
        Ok(())
    }

    pub fn fit(&mut self) -> Result<(VariationalState, FitResult)> {
        let start = Instant::now();
        let mut state = self.init_state()?;
        let mut previous = posterior_mean(&state);
        let mut history = Vec::new();
        let mut converged = false;
        for sweep in 1..=self.config.max_sweeps {
            self.sweep(&mut state).map_err(|e| e.at_sweep(sweep))?;
            let current = posterior_mean(&state);
            let delta = (&current - &previous).amax();
            if !delta.is_finite() {
                return Err(Error::Numerical {
                    sweep: Some(sweep),
                    message: "posterior mean became non-finite".into(),
                });
            }
            history.push(delta);
            previous = current;
            if delta < self.config.tol {
                converged = true;
                break;
            }
        }
        let result = FitResult {
            beta_hat: previous.iter().copied().collect(),
            column_labels: self.design.labels(),
            sweeps_used: history.len(),
            final_delta: *history.last().expect("at least one sweep"),
            delta_history: history,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            converged,
        };
        Ok((state, result))
    }
}

pub fn update_shrinkage(state: &mut VariationalState, indicator: &IndicatorMatrix, config: &FitConfig) {
    let floor = config.rate_floor;
    let p = state.p();
    let products: Vec<f64> = (0..p)
        .map(|j| group_product(&state.delta, indicator.groups_of(j), None))
        .collect();

    let weighted: f64 = (0..p)
        .map(|j| state.ebeta_sq[j] * state.lambda[j].recip_mean() * products[j])
        .sum();
    state.tau.rate = (0.5 * weighted + state.nu.recip_mean()).max(floor);
    let tau_r = state.tau.recip_mean();

    state.nu.rate = (tau_r + 1.0).max(floor);

    for j in 0..p {
        state.lambda[j].rate =
            (0.5 * state.ebeta_sq[j] * tau_r * products[j] + state.c[j].recip_mean()).max(floor);
        state.c[j].rate = (state.lambda[j].recip_mean() + 1.0).max(floor);
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); indicator.d()];
    for j in 0..p {
        for &l in indicator.groups_of(j) {
            members[l].push(j);
        }
    }
    for (l, effects) in members.iter().enumerate() {
        let sum: f64 = effects
            .iter()
            .map(|&j| {
                let base = state.lambda[j].recip_mean() * state.ebeta_sq[j];
                if config.delta_cross_term {
                    base * group_product(&state.delta, indicator.groups_of(j), Some(l))
                } else {
                    base
                }
            })
            .sum();
        let scale = if config.delta_cross_term { 0.5 } else { 1.0 };
        state.delta[l].rate = (scale * tau_r * sum + state.t[l].recip_mean()).max(floor);
        state.t[l].rate = (1.0 + state.delta[l].recip_mean()).max(floor);
    }
}

/// `Σ(β)`, `B(β)` and the factorization they were computed from.
#[derive(Debug, Clone)]
pub struct BetaConditional {
    pub sigma: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub(crate) factor: PrecisionFactor,
}

/// Computes `Σ = (XᵀX + diag(d))⁻¹` and `B = Σ Xᵀ` through the chosen path.
pub fn beta_conditional(
    x: &DMatrix<f64>,
    dvec: &DVector<f64>,
    path: CovariancePath,
    jitter: f64,
) -> Result<BetaConditional> {
    let woodbury = match path {
        CovariancePath::Auto => x.ncols() > x.nrows(),
        CovariancePath::Direct => false,
        CovariancePath::Woodbury => true,
    };
    if woodbury {
        woodbury_conditional(x, dvec, jitter)
    } else {
        let xt = x.transpose();
        direct_conditional(&(&xt * x), &xt, dvec, jitter)
    }
}

fn check_precision(dvec: &DVector<f64>) -> Result<()> {
    match dvec.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        Some(j) => Err(Error::numerical(format!(
            "prior precision for column {j} is {}",
            dvec[j]
        ))),
        None => Ok(()),
    }
}

fn direct_conditional(
    xtx: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    dvec: &DVector<f64>,
    jitter: f64,
) -> Result<BetaConditional> {
    check_precision(dvec)?;
    let mut precision = xtx.clone();
    for j in 0..precision.nrows() {
        precision[(j, j)] += dvec[j];
    }
    let chol = cholesky_with_jitter(&precision, jitter)?;
    let mut sigma = chol.inverse();
    symmetrize(&mut sigma);
    let b = &sigma * xt;
    Ok(BetaConditional {
        sigma,
        b,
        factor: PrecisionFactor::Direct(chol),
    })
}

/// `Σ = D⁻¹ - D⁻¹Xᵀ M⁻¹ X D⁻¹` and `B = D⁻¹ Xᵀ M⁻¹` with `M = I + X D⁻¹ Xᵀ`.
fn woodbury_conditional(
    x: &DMatrix<f64>,
    dvec: &DVector<f64>,
    jitter: f64,
) -> Result<BetaConditional> {
    check_precision(dvec)?;
    let n = x.nrows();
    let dinv = dvec.map(|v| 1.0 / v);
    let mut x_dinv = x.clone();
    for (j, mut col) in x_dinv.column_iter_mut().enumerate() {
        col *= dinv[j];
    }
    let mut m = &x_dinv * x.transpose();
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let chol = cholesky_with_jitter(&m, jitter)?;
    let mut m_inv = chol.inverse();
    symmetrize(&mut m_inv);
    let b = x_dinv.transpose() * &m_inv;
    let mut sigma = -(&b * &x_dinv);
    for j in 0..sigma.nrows() {
        sigma[(j, j)] += dinv[j];
    }
    symmetrize(&mut sigma);
    Ok(BetaConditional {
        sigma,
        b,
        factor: PrecisionFactor::Woodbury(chol),
    })
}

/// `h_i = x_iᵀ Σ x_i`, with `xt = Xᵀ` and `b = Σ Xᵀ`. Each entry must lie in
/// `[0, 1)` so that `σ²(z_i) = 1 / (1 - h_i) ≥ 1`.
pub fn hat_diagonal(xt: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = xt.ncols();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let h = xt.column(i).dot(&b.column(i));
        if !(h > -1e-12 && h < 1.0) {
            return Err(Error::numerical(format!(
                "x_iᵀΣx_i = {h} outside (0, 1) for observation {i}"
            )));
        }
        out[i] = h.max(0.0);
    }
    Ok(out)
}

/// `E[β_j²] = Σ_jj + Σ_i B_ji² (σ²(z_i) - (E[z_i] - μ(z_i)) E[z_i]) + (B E[z])_j²`.
pub fn second_moments(
    sigma: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mu_z: &DVector<f64>,
    var_z: &DVector<f64>,
    ez: &DVector<f64>,
) -> Result<DVector<f64>> {
    let w = DVector::from_iterator(
        ez.len(),
        (0..ez.len()).map(|i| var_z[i] - (ez[i] - mu_z[i]) * ez[i]),
    );
    let mean = b * ez;
    let p = sigma.nrows();
    let mut out = DVector::zeros(p);
    for j in 0..p {
        let spread: f64 = b.row(j).iter().zip(w.iter()).map(|(b, w)| b * b * w).sum();
        let value = sigma[(j, j)] + spread + mean[j] * mean[j];
        if !value.is_finite() || value < EBETA_SQ_NEGATIVE_TOL {
            return Err(Error::numerical(format!("E[β_{j}²] = {value}")));
        }
        out[j] = value.max(0.0);
    }
    Ok(out)
}

/// Fits the variational approximation.
pub fn fit(
    design: &DesignMatrix,
    indicator: &IndicatorMatrix,
    response: &BinaryResponse,
    config: &FitConfig,
) -> Result<(VariationalState, FitResult)> {
    ViEngine::new(design, indicator, response, *config)?.fit()
}
