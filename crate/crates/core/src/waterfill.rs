//! Least-favorable Gaussian priors over an ellipsoid and the linear minimax
//! KL risk, plus the squared-error (Pinsker) waterfilling used as the
//! plug-in baseline.
//!
//! The Lagrange condition for the KL problem gives, for each coordinate,
//!
//! ```text
//! θ̃_i² = ½ [ d √(1 + 4λ/(a_i² d)) − (v_n + v_nm) ]_+ ,   d = v_n − v_nm,
//! ```
//!
//! and λ̃ is fixed by the binding budget `Σ a_i² θ̃_i² = C`. The bracket is
//! positive exactly when `a_i² < mλ`, and rationalizing it gives
//!
//! ```text
//! θ̃_i² = 2d (λ − a_i²/m)_+ / ( a_i² [ d √(1 + 4λ/(a_i² d)) + v_n + v_nm ] ),
//! ```
//!
//! which stays accurate when the budget is tiny. The solver bisects on the
//! excess `λ − a_1²/m` rather than on λ itself for the same reason.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::{EllipsoidSpec, Family};
use crate::error::{check_len, Error, Result};
use crate::model::{DesignSizes, DiagonalPrior, PredictiveGaussian};
use crate::risk::{predictive_params, variance_gain};
use crate::solver::bisect_increasing;

/// Relative tolerance on the budget constraint.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillSolution {
    /// Lagrange multiplier λ̃.
    pub lambda: f64,
    /// Number of leading coordinates with `a_i² ≤ mλ̃`.
    pub cutoff: usize,
    /// Linear minimax risk `R_L`.
    pub risk: f64,
    /// Least-favorable prior variances θ̃_i².
    pub theta2: Vec<f64>,
}

impl WaterfillSolution {
    /// The least-favorable prior `N(0, diag(θ̃²))`.
    pub fn prior(&self) -> DiagonalPrior {
        DiagonalPrior::new(self.theta2.clone()).expect("waterfilling variances are nonnegative")
    }

    /// A point of the ellipsoid boundary, `θ_i = θ̃_i`.
    pub fn theta(&self) -> Vec<f64> {
        self.theta2.iter().map(|t| t.sqrt()).collect()
    }
}

struct KlWaterfill<'a> {
    weights: &'a [f64],
    m: f64,
    d: f64,
    s: f64,
}

impl<'a> KlWaterfill<'a> {
    fn new(weights: &'a [f64], sizes: &DesignSizes) -> Self {
        Self {
            weights,
            m: sizes.m() as f64,
            d: sizes.v_n() - sizes.v_nm(),
            s: sizes.v_n() + sizes.v_nm(),
        }
    }

    fn a1_sq(&self) -> f64 {
        self.weights[0] * self.weights[0]
    }

    /// θ̃² for weight `a` given λ and the excess `λ − a²/m`.
    fn theta2(&self, a: f64, lambda: f64, excess: f64) -> f64 {
        if excess <= 0.0 {
            return 0.0;
        }
        let a2 = a * a;
        let root = (1.0 + 4.0 * lambda / (a2 * self.d)).sqrt();
        2.0 * self.d * excess / (a2 * (self.d * root + self.s))
    }

    /// `Σ a_i² θ̃_i²` as a function of the excess `δ = λ − a_1²/m`.
    fn budget_at_excess(&self, delta: f64) -> f64 {
        let a1_sq = self.a1_sq();
        let lambda = a1_sq / self.m + delta;
        let mut total = 0.0;
        for &a in self.weights {
            let excess = delta + (a1_sq - a * a) / self.m;
            if excess <= 0.0 {
                break;
            }
            total += a * a * self.theta2(a, lambda, excess);
        }
        total
    }

    fn solution_at_excess(&self, delta: f64, sizes: &DesignSizes) -> WaterfillSolution {
        let a1_sq = self.a1_sq();
        let lambda = a1_sq / self.m + delta;
        let mut cutoff = 0;
        let theta2: Vec<f64> = self
            .weights
            .iter()
            .map(|&a| {
                let excess = delta + (a1_sq - a * a) / self.m;
                if excess >= 0.0 {
                    cutoff += 1;
                }
                self.theta2(a, lambda, excess)
            })
            .collect();
        let risk = variance_gain(theta2.iter().copied(), sizes);
        WaterfillSolution {
            lambda,
            cutoff,
            risk,
            theta2,
        }
    }
}

fn check_spec(spec: &EllipsoidSpec, sizes: &DesignSizes) -> Result<()> {
    check_len(sizes.n(), spec.len())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// Left-hand side of the multiplier equation,
/// `Σ a_i² [ d √(1 + 4λ/(a_i² d)) − (v_n + v_nm) ]_+`; the solution has value `2C`.
pub fn waterfill_lhs(lambda: f64, spec: &EllipsoidSpec, sizes: &DesignSizes) -> Result<f64> {
    check_spec(spec, sizes)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be nonnegative, got {lambda}")));
    }
    let wf = KlWaterfill::new(spec.weights(), sizes);
    Ok(spec
        .weights()
        .iter()
        .map(|&a| 2.0 * a * a * wf.theta2(a, lambda, lambda - a * a / wf.m))
        .sum())
}

fn l2_closed_form(spec: &EllipsoidSpec, sizes: &DesignSizes) -> bool {
    spec.family() == Family::L2Ball && sizes.n() == sizes.m()
}

/// λ̃ solving `waterfill_lhs(λ̃) = 2C` to relative `tol`.
pub fn solve_lambda(spec: &EllipsoidSpec, sizes: &DesignSizes, tol: f64) -> Result<f64> {
    Ok(least_favorable_with_tol(spec, sizes, tol)?.lambda)
}

/// Least-favorable variances, cutoff and linear minimax risk at the default
/// tolerance.
pub fn least_favorable(spec: &EllipsoidSpec, sizes: &DesignSizes) -> Result<WaterfillSolution> {
    least_favorable_with_tol(spec, sizes, DEFAULT_TOL)
}

/// As [`least_favorable`]. The L² ball with `n = m` uses the closed form
/// `θ̃_i² = C/n`.
pub fn least_favorable_with_tol(
    spec: &EllipsoidSpec,
    sizes: &DesignSizes,
    tol: f64,
) -> Result<WaterfillSolution> {
    check_spec(spec, sizes)?;
    check_tol(tol)?;
    if l2_closed_form(spec, sizes) {
        let n = sizes.n();
        let t2 = spec.radius() / n as f64;
        let (vn, vnm) = (sizes.v_n(), sizes.v_nm());
        let theta2 = vec![t2; n];
        return Ok(WaterfillSolution {
            lambda: (vn + t2) * (vnm + t2) / (vn - vnm),
            cutoff: n,
            risk: variance_gain(theta2.iter().copied(), sizes),
            theta2,
        });
    }
    least_favorable_by_bisection(spec, sizes, tol)
}

/// The general bisection path, without the L² shortcut.
pub fn least_favorable_by_bisection(
    spec: &EllipsoidSpec,
    sizes: &DesignSizes,
    tol: f64,
) -> Result<WaterfillSolution> {
    check_spec(spec, sizes)?;
    check_tol(tol)?;
    let wf = KlWaterfill::new(spec.weights(), sizes);
    let delta = bisect_increasing(|d| wf.budget_at_excess(d), spec.radius(), tol)?;
    Ok(wf.solution_at_excess(delta, sizes))
}

/// Bayes predictive density under the least-favorable prior.
pub fn minimax_predictive(
    x: &[f64],
    sol: &WaterfillSolution,
    sizes: &DesignSizes,
) -> Result<PredictiveGaussian> {
    check_len(sizes.n(), x.len())?;
    predictive_params(x, &sol.prior(), sizes)
}

/// Squared-error minimax solution over the same ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinskerBaseline {
    /// `θ*_i² = v (μ/a_i − 1)_+`.
    pub theta_star2: Vec<f64>,
    /// `Σ v θ*_i² / (v + θ*_i²)`, the minimax squared-error risk of diagonal
    /// linear estimators.
    pub est_risk: f64,
    /// Water level μ.
    pub mu: f64,
}

impl PinskerBaseline {
    /// Optimal shrinkage `c_i = θ*_i² / (θ*_i² + v)`.
    pub fn shrink(&self, v: f64) -> Vec<f64> {
        self.theta_star2.iter().map(|t| t / (t + v)).collect()
    }

    /// Minimax KL risk of the corresponding plug-in density, half the
    /// squared-error risk.
    pub fn plugin_kl_risk(&self) -> f64 {
        0.5 * self.est_risk
    }
}

/// Pinsker's waterfilling for estimating θ in `N(θ, v I)` over the ellipsoid.
pub fn pinsker_estimation_baseline(spec: &EllipsoidSpec, v: f64) -> Result<PinskerBaseline> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {v}")));
    }
    let w = spec.weights();
    let a1 = w[0];
    // Σ a_i² θ*_i² = v Σ a_i (μ − a_i)_+ with μ = a_1 + δ
    let budget = |delta: f64| {
        let mut total = 0.0;
        for &a in w {
            let gap = delta + (a1 - a);
            if gap <= 0.0 {
                break;
            }
            total += v * a * gap;
        }
        total
    };
    let delta = bisect_increasing(budget, spec.radius(), DEFAULT_TOL)?;
    let theta_star2: Vec<f64> = w
        .iter()
        .map(|&a| {
            let gap = delta + (a1 - a);
            if gap > 0.0 {
                v * gap / a
            } else {
                0.0
            }
        })
        .collect();
    let est_risk = theta_star2.iter().map(|t| v * t / (v + t)).sum();
    Ok(PinskerBaseline {
        theta_star2,
        est_risk,
        mu: a1 + delta,
    })
}
