//! Standard normal helpers and one-sided truncated normal moments/sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the inverse Mills ratio switches to a continued fraction.
const MILLS_SWITCH: f64 = -8.0;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF. Never returns NaN for non-NaN input.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate in the lower tail.
pub fn ln_cdf(x: f64) -> f64 {
    if x >= MILLS_SWITCH {
        cdf(x).ln()
    } else {
        // Φ(x) = φ(x) · R(-x) with R the Mills ratio of the upper tail.
        -0.5 * x * x - LN_SQRT_2PI + upper_tail_mills(-x).ln()
    }
}

/// Mills ratio `R(t) = (1 - Φ(t)) / φ(t)` for large positive `t`, by
/// Lentz's evaluation of `1/(t + 1/(t + 2/(t + 3/(t + ...))))`.
fn upper_tail_mills(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x >= MILLS_SWITCH {
        pdf(x) / cdf(x)
    } else {
        1.0 / upper_tail_mills(-x)
    }
}

/// Mean of `N(mean, var)` truncated to the side `sign · z > 0`
/// (`sign = +1` for `y = 1`, `-1` for `y = 0`).
#[inline]
pub fn truncated_mean(mean: f64, var: f64, sign: f64) -> f64 {
    let sd = var.sqrt();
    mean + sign * sd * inverse_mills(sign * mean / sd)
}

/// Variance of the same one-sided truncated normal, in the form
/// `var - (E[z] - mean) · E[z]`.
#[inline]
pub fn truncated_variance(mean: f64, var: f64, sign: f64) -> f64 {
    let ez = truncated_mean(mean, var, sign);
    var - (ez - mean) * ez
}

/// Draws `x ~ N(0, 1)` conditioned on `x > lower`.
pub fn sample_standard_above<R: Rng + ?Sized>(rng: &mut R, lower: f64) -> f64 {
    if lower <= 0.3 {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            if x > lower {
                return x;
            }
        }
    }
    // Exponential proposal with the optimal rate for this truncation point.
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("rate is positive");
    loop {
        let z = lower + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

/// Draws from `N(mean, var)` truncated to `sign · z > 0`.
pub fn sample_truncated<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64, sign: f64) -> f64 {
    let sd = var.sqrt();
    let x = sample_standard_above(rng, -sign * mean / sd);
    sign * (sign * mean + sd * x)
}
