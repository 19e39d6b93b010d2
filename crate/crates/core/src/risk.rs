//! Closed-form average KL risks in the Gaussian sequence model.
//!
//! All risks are in nats per future coordinate, i.e. the expected log ratio
//! between the true future density and the predictive density divided by `m`.

use crate::error::{check_len, Error, Result};
use crate::model::{DesignSizes, DiagonalPrior, PredictiveGaussian};

/// Risk of the Bayes predictive density under the prior `N(0, diag(s))`
/// when the truth is `theta`.
pub fn linear_risk(theta: &[f64], prior: &DiagonalPrior, sizes: &DesignSizes) -> Result<f64> {
    check_len(sizes.n(), theta.len())?;
    check_len(sizes.n(), prior.len())?;
    let (vn, vnm) = (sizes.v_n(), sizes.v_nm());
    let bracket: f64 = theta
        .iter()
        .zip(prior.variances())
        .map(|(t, &s)| {
            let t2 = t * t;
            ((vnm + s) / (vn + s)).ln() + (vnm + t2) / (vnm + s) - (vn + t2) / (vn + s)
        })
        .sum();
    Ok(uniform_prior_risk(sizes) + bracket / (2.0 * sizes.m() as f64))
}

/// Risk of the flat-prior predictive `N(x, (v_n + v_m) I)`; free of θ.
pub fn uniform_prior_risk(sizes: &DesignSizes) -> f64 {
    sizes.n() as f64 / (2.0 * sizes.m() as f64) * (sizes.v_n() / sizes.v_nm()).ln()
}

/// `inf_S linear_risk(θ, S)`, attained at `S = diag(θ²)`.
pub fn oracle_risk(theta: &[f64], sizes: &DesignSizes) -> Result<f64> {
    check_len(sizes.n(), theta.len())?;
    Ok(variance_gain(theta.iter().map(|t| t * t), sizes))
}

/// `(n/2m) log(v_n/v_nm) + (1/2m) Σ log((v_nm + τ_i)/(v_n + τ_i))` evaluated
/// as `(1/2m) Σ log1p((v_n − v_nm) τ_i / ((v_n + τ_i) v_nm))`, which removes
/// the cancellation between the two terms when most `τ_i` vanish.
pub(crate) fn variance_gain(tau: impl Iterator<Item = f64>, sizes: &DesignSizes) -> f64 {
    let (vn, vnm) = (sizes.v_n(), sizes.v_nm());
    let d = vn - vnm;
    let s: f64 = tau.map(|t| (d * t / ((vn + t) * vnm)).ln_1p()).sum();
    s / (2.0 * sizes.m() as f64)
}

/// Risk of the plug-in density `N(c ∘ x, v_m I)`; equals half the
/// squared-error risk of `c ∘ x` as an estimate of θ.
pub fn plugin_risk(theta: &[f64], shrink: &[f64], sizes: &DesignSizes) -> Result<f64> {
    check_len(sizes.n(), theta.len())?;
    check_len(sizes.n(), shrink.len())?;
    check_shrink(shrink)?;
    let vn = sizes.v_n();
    let s: f64 = theta
        .iter()
        .zip(shrink)
        .map(|(t, c)| c * c * vn + (1.0 - c) * (1.0 - c) * t * t)
        .sum();
    Ok(s / (2.0 * sizes.m() as f64 * sizes.v_m()))
}

pub(crate) fn check_shrink(shrink: &[f64]) -> Result<()> {
    match shrink.iter().position(|c| !(0.0..=1.0).contains(c)) {
        Some(i) => Err(Error::InvalidArgument(format!(
            "shrinkage c[{i}] = {} outside [0, 1]",
            shrink[i]
        ))),
        None => Ok(()),
    }
}

/// Posterior predictive for `x̃` given `x` under `N(0, diag(s))`.
pub fn predictive_params(
    x: &[f64],
    prior: &DiagonalPrior,
    sizes: &DesignSizes,
) -> Result<PredictiveGaussian> {
    check_len(prior.len(), x.len())?;
    let (vn, vm) = (sizes.v_n(), sizes.v_m());
    let (mean, var) = x
        .iter()
        .zip(prior.variances())
        .map(|(xi, &s)| (s / (s + vn) * xi, s * vn / (s + vn) + vm))
        .unzip();
    Ok(PredictiveGaussian { mean, var })
}

/// `(1/m) KL(N(θ, v_m I) ‖ pred)`.
pub fn kl_true_vs_predictive(
    theta: &[f64],
    pred: &PredictiveGaussian,
    sizes: &DesignSizes,
) -> Result<f64> {
    check_len(theta.len(), pred.mean.len())?;
    check_len(theta.len(), pred.var.len())?;
    if let Some(i) = pred.var.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "predictive variance var[{i}] = {} must be positive",
            pred.var[i]
        )));
    }
    let vm = sizes.v_m();
    let s: f64 = theta
        .iter()
        .zip(pred.mean.iter().zip(&pred.var))
        .map(|(t, (mu, v))| {
            let e = t - mu;
            0.5 * (v / vm).ln() + (vm + e * e) / (2.0 * v) - 0.5
        })
        .sum();
    Ok(s / sizes.m() as f64)
}
