//! Limiting constants for the L² ball and Sobolev ellipsoids, and the
//! lower-bound construction that squeezes the overall minimax risk against
//! the linear one.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::{EllipsoidSpec, Family};
use crate::error::{check_len, Error, Result};
use crate::model::{DesignSizes, DiagonalPrior};
use crate::risk::variance_gain;
use crate::waterfill::{least_favorable, WaterfillSolution};

pub const DEFAULT_KMAX: usize = 40;
pub const DEFAULT_ALPHA_COND: f64 = 1.5;

/// Relative slack allowed when the prior condition holds with equality.
pub const CONDITION_RTOL: f64 = 1e-12;

/// `lim R_L` over the L² ball with `m = n`: `½ log((1 + 2C)/(1 + C))`.
pub fn l2ball_limit_constant(c: f64) -> f64 {
    0.5 * ((1.0 + 2.0 * c) / (1.0 + c)).ln()
}

/// k-th Taylor coefficient of `√(1 + 8x^{-2α})` in powers of `x^{(2k-1)α}`,
/// already integrated against `x^{2α}` on `[0, 1]`.
pub fn sobolev_series_term(k: usize, alpha: f64) -> f64 {
    // (2k)! / (k!² 32^k), built up as a product to stay in range
    let mut central = 1.0;
    for j in 1..=k {
        let j = j as f64;
        central *= (2.0 * j) * (2.0 * j - 1.0) / (j * j * 32.0);
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let k = k as f64;
    2.0 * std::f64::consts::SQRT_2 * sign * central / (1.0 - 2.0 * k) / ((2.0 * k + 1.0) * alpha + 1.0)
}

pub fn sobolev_series_sum(alpha: f64, kmax: usize) -> f64 {
    (0..=kmax).map(|k| sobolev_series_term(k, alpha)).sum()
}

/// Bound on the truncation error of [`sobolev_series_sum`], using the
/// term ratio `≤ 1/4` that holds from `k = 2` on.
pub fn series_tail_bound(alpha: f64, kmax: usize) -> f64 {
    sobolev_series_term(kmax.max(1) + 1, alpha).abs() * 4.0 / 3.0
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("α must be positive, got {alpha}")))
    }
}

/// Constant `M` in `N ≈ M n^{1/(2α+1)}`.
pub fn sobolev_m(alpha: f64, c: f64, kmax: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let denom = sobolev_series_sum(alpha, kmax) - 3.0 / (2.0 * alpha + 1.0);
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "series denominator {denom} is not positive for α = {alpha}"
        )));
    }
    Ok((4.0 * c / denom).powf(1.0 / (2.0 * alpha + 1.0)))
}

/// Constant `K` in `Σ_{i≤N} θ̃_i²/(v_n + θ̃_i²) ≈ K N`.
pub fn sobolev_k(alpha: f64, kmax: usize) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 + 1.0 / (2.0 * (2.0 * alpha + 1.0)) - 0.5 * sobolev_series_sum(alpha, kmax))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevConstants {
    pub alpha: f64,
    pub m: f64,
    pub k: f64,
    pub rate_exponent: f64,
    /// `(KM/4, KM/2)`.
    pub bracket: (f64, f64),
    pub series_tail: f64,
}

impl SobolevConstants {
    pub fn compute(alpha: f64, c: f64, kmax: usize) -> Result<Self> {
        let m = sobolev_m(alpha, c, kmax)?;
        let k = sobolev_k(alpha, kmax)?;
        Ok(Self {
            alpha,
            m,
            k,
            rate_exponent: 2.0 * alpha / (2.0 * alpha + 1.0),
            bracket: (k * m / 4.0, k * m / 2.0),
            series_tail: series_tail_bound(alpha, kmax),
        })
    }
}

/// Rate exponent `r` such that `n^r R_L` has a finite nonzero limit.
pub fn rate_exponent(family: Family) -> Result<f64> {
    match family {
        Family::L2Ball => Ok(0.0),
        Family::Sobolev { alpha } => Ok(2.0 * alpha / (2.0 * alpha + 1.0)),
        Family::Custom => Err(Error::InvalidArgument(
            "no known rate for custom weights".into(),
        )),
    }
}

/// `(n, n^r R_L)` for each `n`, with `m = m_ratio · n`.
pub fn rate_constant_extract(
    family: Family,
    c: f64,
    n_list: &[usize],
    m_ratio: usize,
) -> Result<Vec<(usize, f64)>> {
    let r = rate_exponent(family)?;
    if m_ratio == 0 {
        return Err(Error::InvalidArgument("m_ratio must be positive".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let spec = match family {
                Family::L2Ball => EllipsoidSpec::l2_ball(n, c)?,
                Family::Sobolev { alpha } => EllipsoidSpec::sobolev(n, alpha, c)?,
                Family::Custom => unreachable!(),
            };
            let sizes = DesignSizes::new(n, m_ratio * n)?;
            let sol = least_favorable(&spec, &sizes)?;
            Ok((n, (n as f64).powf(r) * sol.risk))
        })
        .collect()
}

/// `C − Σ a_i² s_i² − [−8α (Σ a_i⁴ s_i⁴) log v_n]^{1/2}`, where `s_i²` are the
/// prior variances.
pub fn prior_condition_slack(
    prior: &DiagonalPrior,
    spec: &EllipsoidSpec,
    sizes: &DesignSizes,
    alpha_cond: f64,
) -> Result<f64> {
    check_len(spec.len(), prior.len())?;
    let (mut first, mut fourth) = (0.0, 0.0);
    for (a, s) in spec.weights().iter().zip(prior.variances()) {
        let w = a * a * s;
        first += w;
        fourth += w * w;
    }
    let spread = (-8.0 * alpha_cond * fourth * sizes.v_n().ln()).sqrt();
    Ok(spec.radius() - first - spread)
}

/// Whether the prior keeps enough of its mass inside the ellipsoid for the
/// lower bound to apply. Equality counts, up to [`CONDITION_RTOL`].
pub fn check_prior_condition(
    prior: &DiagonalPrior,
    spec: &EllipsoidSpec,
    sizes: &DesignSizes,
    alpha_cond: f64,
) -> Result<bool> {
    if !(alpha_cond > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "condition exponent must be positive, got {alpha_cond}"
        )));
    }
    let slack = prior_condition_slack(prior, spec, sizes, alpha_cond)?;
    Ok(slack >= -CONDITION_RTOL * spec.radius())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaShrink {
    pub gamma: f64,
    /// `b_i² = θ̃_i² / (1 + γ)`.
    pub b2: DiagonalPrior,
}

/// Shrinks the least-favorable variances by `1 + γ`, with
/// `γ = C^{-1} [8α log(1/v_n) Σ a_i⁴ θ̃_i⁴]^{1/2}`, so that the prior condition
/// holds with equality.
pub fn gamma_shrink(
    sol: &WaterfillSolution,
    spec: &EllipsoidSpec,
    sizes: &DesignSizes,
    alpha_cond: f64,
) -> Result<GammaShrink> {
    if !(alpha_cond > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "condition exponent must exceed 1, got {alpha_cond}"
        )));
    }
    check_len(spec.len(), sol.theta2.len())?;
    let fourth: f64 = spec
        .weights()
        .iter()
        .zip(&sol.theta2)
        .map(|(a, t)| (a * a * t).powi(2))
        .sum();
    let gamma = (8.0 * alpha_cond * (1.0 / sizes.v_n()).ln() * fourth).sqrt() / spec.radius();
    let b2 = sol.theta2.iter().map(|t| t / (1.0 + gamma)).collect();
    Ok(GammaShrink {
        gamma,
        b2: DiagonalPrior::new(b2)?,
    })
}

/// Main term of the Bayes-risk lower bound under `N(0, diag(s²))`:
/// `(n/2m) log(v_n/v_nm) + (1/2m) Σ log((v_nm + s_i²)/(v_n + s_i²))`.
/// The remainder is only known up to order; see [`lower_bound_remainder`].
pub fn kl_lower_bound(prior: &DiagonalPrior, sizes: &DesignSizes) -> Result<f64> {
    check_len(sizes.n(), prior.len())?;
    Ok(variance_gain(prior.variances().iter().copied(), sizes))
}

/// Order `v_n^α` of the remainder dropped by [`kl_lower_bound`].
pub fn lower_bound_remainder(sizes: &DesignSizes, alpha_cond: f64) -> f64 {
    sizes.v_n().powf(alpha_cond)
}

/// `exp(−(Q − Σσ_k²)² / (4 Σσ_k⁴))` for `Q > Σσ_k²`, else 1. Used as the
/// bound on `P(Σ ε_k² > Q)` for independent centered Gaussians `ε_k`
/// with variances `σ_k²`.
pub fn gaussian_quadratic_tail_bound(sigma2: &[f64], q: f64) -> f64 {
    let total: f64 = sigma2.iter().sum();
    if q <= total {
        return 1.0;
    }
    let fourth: f64 = sigma2.iter().map(|s| s * s).sum();
    (-(q - total).powi(2) / (4.0 * fourth)).exp()
}

/// Variances of `a_i θ_i` under the prior, the input to the tail bound for
/// `Σ a_i² θ_i² > C`.
pub fn weighted_variances(prior: &DiagonalPrior, spec: &EllipsoidSpec) -> Result<Vec<f64>> {
    check_len(spec.len(), prior.len())?;
    Ok(spec
        .weights()
        .iter()
        .zip(prior.variances())
        .map(|(a, s)| a * a * s)
        .collect())
}
