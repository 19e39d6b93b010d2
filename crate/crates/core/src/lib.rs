//! Minimax predictive densities for the Gaussian sequence model on
//! ellipsoids.
//!
//! Past data `X ~ N(θ, v_n I)` predicts `X̃ ~ N(θ, v_m I)` with `v_n = 1/n`,
//! `v_m = 1/m`. Over `Θ(a, C) = {Σ a_i² θ_i² ≤ C}` the Bayes rule under the
//! Gaussian prior found by [`least_favorable`] is asymptotically minimax for
//! the per-observation KL risk, and the same rule applies to nonparametric
//! regression on an equispaced grid through [`RegressionGrid`].

pub mod asymptotics;
pub mod ellipsoid;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod risk;
mod solver;
pub mod waterfill;

pub use asymptotics::{
    check_prior_condition, gamma_shrink, kl_lower_bound, l2ball_limit_constant,
    rate_constant_extract, rate_exponent, sobolev_k, sobolev_m, sobolev_series_sum, GammaShrink,
    SobolevConstants,
};
pub use ellipsoid::{ellipsoid_contains, EllipsoidSpec, Family};
pub use error::{Error, Result};
pub use model::{
    design_matrix, sequence_transform, synthesize_f, trig_basis, truncation_bias, DesignSizes,
    DiagonalPrior, PredictiveGaussian, RegressionGrid,
};
pub use montecarlo::{
    individual_vs_simultaneous_plugin, mc_equivalence_check, mc_linear_risk, mc_prior_tail,
    McEstimate,
};
pub use risk::{
    kl_true_vs_predictive, linear_risk, oracle_risk, plugin_risk, predictive_params,
    uniform_prior_risk,
};
pub use waterfill::{
    least_favorable, minimax_predictive, pinsker_estimation_baseline, solve_lambda,
    waterfill_lhs, PinskerBaseline, WaterfillSolution,
};
