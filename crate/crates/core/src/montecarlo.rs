//! Seeded Monte Carlo checks of the closed-form risks.
//!
//! Replicates are split into fixed chunks of [`CHUNK`] draws. Chunk `c` of
//! estimator lane `l` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `(l << 32) | c`, and chunk statistics are merged in chunk order, so the
//! result is bit-identical for any thread count. Standard normals come from
//! `rand_distr::StandardNormal` (ziggurat).
//!
//! Risk estimators average the closed-form conditional KL given `X` wherever
//! possible; only the model-equivalence check and the individual-risk check
//! sample the future observation itself.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::EllipsoidSpec;
use crate::error::{check_len, Error, Result};
use crate::model::{DesignSizes, DiagonalPrior, PredictiveGaussian, RegressionGrid};
use crate::risk::{check_shrink, kl_true_vs_predictive, predictive_params};

pub const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√replicates`.
    pub std_error: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean − target|` in standard errors. Zero error with an exact hit
    /// gives 0; zero error with a miss gives infinity.
    pub fn z_score(&self, target: f64) -> f64 {
        z(self.mean - target, self.std_error)
    }

    /// Difference of two independent estimates in joint standard errors.
    pub fn joint_z(&self, other: &McEstimate) -> f64 {
        z(
            self.mean - other.mean,
            self.std_error.hypot(other.std_error),
        )
    }
}

fn z(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / se
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        Moments {
            count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }
}

fn check_replicates(replicates: usize, min: usize) -> Result<()> {
    if replicates < min {
        Err(Error::InvalidArgument(format!(
            "need at least {min} replicates, got {replicates}"
        )))
    } else {
        Ok(())
    }
}

/// Runs `replicates` draws of `sample` and summarizes them. `init` builds
/// per-chunk scratch space.
pub fn run_replicates<S, I, F>(replicates: usize, seed: u64, lane: u32, init: I, sample: F) -> McEstimate
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = replicates.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((lane as u64) << 32) | c as u64);
            let mut scratch = init();
            let count = CHUNK.min(replicates - c * CHUNK);
            let mut mom = Moments::default();
            for _ in 0..count {
                mom.push(sample(&mut scratch, &mut rng));
            }
            mom
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.count > 1 {
        total.m2 / (total.count - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        mean: total.mean,
        std_error: (var / total.count as f64).sqrt(),
        replicates,
        seed,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `x ~ N(θ, v I)`.
fn draw_around(theta: &[f64], v: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = v.sqrt();
    theta.iter().map(|t| t + sd * normal(rng)).collect()
}

fn log_normal_density(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let ss: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * x.len() as f64 * (2.0 * PI * var).ln() - ss / (2.0 * var)
}

fn log_centered_density(x: &[f64], var: f64) -> f64 {
    let ss: f64 = x.iter().map(|a| a * a).sum();
    -0.5 * x.len() as f64 * (2.0 * PI * var).ln() - ss / (2.0 * var)
}

/// One draw of past responses at `i/n` and future responses at `j/m` with
/// unit noise around `f_n = Σ θ_j φ_j`.
pub fn simulate_pair(theta: &[f64], sizes: &DesignSizes, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(sizes.n(), theta.len())?;
    let grid = RegressionGrid::new(*sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_regression_pair(&grid, &grid.eval_past(theta), &grid.eval_future(theta), &mut rng))
}

fn draw_regression_pair(
    grid: &RegressionGrid,
    f_past: &[f64],
    f_future: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(f_past.len(), grid.sizes().n());
    let y = f_past.iter().map(|f| f + normal(rng)).collect();
    let ytilde = f_future.iter().map(|f| f + normal(rng)).collect();
    (y, ytilde)
}

/// Average over `x ~ N(θ, v_n I)` of the conditional KL of the linear
/// predictive density; unbiased for `linear_risk`.
pub fn mc_linear_risk(
    theta: &[f64],
    prior: &DiagonalPrior,
    sizes: &DesignSizes,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_len(sizes.n(), theta.len())?;
    check_len(sizes.n(), prior.len())?;
    check_replicates(replicates, 1000)?;
    let vn = sizes.v_n();
    Ok(run_replicates(replicates, seed, 0, || (), |_, rng| {
        let x = draw_around(theta, vn, rng);
        let pred = predictive_params(&x, prior, sizes).expect("lengths checked");
        kl_true_vs_predictive(theta, &pred, sizes).expect("variances positive")
    }))
}

/// Same as [`mc_linear_risk`] for the flat-prior predictive `N(x, (v_n + v_m) I)`.
pub fn mc_uniform_risk(
    theta: &[f64],
    sizes: &DesignSizes,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_len(sizes.n(), theta.len())?;
    check_replicates(replicates, 2)?;
    let (vn, vm) = (sizes.v_n(), sizes.v_m());
    Ok(run_replicates(replicates, seed, 0, || (), |_, rng| {
        let pred = PredictiveGaussian {
            mean: draw_around(theta, vn, rng),
            var: vec![vn + vm; theta.len()],
        };
        kl_true_vs_predictive(theta, &pred, sizes).expect("variances positive")
    }))
}

/// Conditional-KL average for the plug-in density `N(c ∘ x, v_m I)`.
pub fn mc_plugin_risk(
    theta: &[f64],
    shrink: &[f64],
    sizes: &DesignSizes,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_len(sizes.n(), theta.len())?;
    check_len(sizes.n(), shrink.len())?;
    check_shrink(shrink)?;
    check_replicates(replicates, 2)?;
    let (vn, vm) = (sizes.v_n(), sizes.v_m());
    Ok(run_replicates(replicates, seed, 0, || (), |_, rng| {
        let x = draw_around(theta, vn, rng);
        let pred = PredictiveGaussian {
            mean: x.iter().zip(shrink).map(|(x, c)| c * x).collect(),
            var: vec![vm; theta.len()],
        };
        kl_true_vs_predictive(theta, &pred, sizes).expect("variances positive")
    }))
}

/// Risk of the flat-prior rule estimated in both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    /// Sampled from `(Y, Ỹ)`; the predictive density for `Ỹ` is the
    /// sequence-space rule times the exact law of the noise-only coordinates,
    /// carried back through the Jacobian of the orthogonal transform.
    pub regression: McEstimate,
    /// Sampled from `(X, X̃)` directly.
    pub sequence: McEstimate,
}

pub fn mc_equivalence_check(
    theta: &[f64],
    sizes: &DesignSizes,
    replicates: usize,
    seed: u64,
) -> Result<EquivalenceCheck> {
    check_len(sizes.n(), theta.len())?;
    check_replicates(replicates, 2)?;
    let grid = RegressionGrid::new(*sizes)?;
    let (f_past, f_future) = (grid.eval_past(theta), grid.eval_future(theta));
    let (vn, vm) = (sizes.v_n(), sizes.v_m());
    let m = sizes.m() as f64;
    let log_jac = grid.future_log_jacobian();

    let regression = run_replicates(replicates, seed, 0, || (), |_, rng| {
        let (y, ytilde) = draw_regression_pair(&grid, &f_past, &f_future, rng);
        let log_true = log_normal_density(&ytilde, &f_future, 1.0);
        let x = grid.to_sequence(&y);
        let (xt, zt) = grid.split_future(&ytilde);
        let log_pred =
            log_normal_density(&xt, &x, vn + vm) + log_centered_density(&zt, vm) + log_jac;
        (log_true - log_pred) / m
    });
    let sequence = run_replicates(replicates, seed, 1, || (), |_, rng| {
        let x = draw_around(theta, vn, rng);
        let xt = draw_around(theta, vm, rng);
        (log_normal_density(&xt, theta, vm) - log_normal_density(&xt, &x, vn + vm)) / m
    });
    Ok(EquivalenceCheck {
        regression,
        sequence,
    })
}

/// Fraction of prior draws falling outside the ellipsoid.
pub fn mc_prior_tail(
    prior: &DiagonalPrior,
    spec: &EllipsoidSpec,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_len(spec.len(), prior.len())?;
    check_replicates(replicates, 10_000)?;
    let scales: Vec<f64> = spec
        .weights()
        .iter()
        .zip(prior.variances())
        .filter(|(_, s)| **s > 0.0)
        .map(|(a, s)| a * a * s)
        .collect();
    let c = spec.radius();
    Ok(run_replicates(replicates, seed, 0, || (), |_, rng| {
        let q: f64 = scales
            .iter()
            .map(|w| {
                let z = normal(rng);
                w * z * z
            })
            .sum();
        if q > c {
            1.0
        } else {
            0.0
        }
    }))
}

/// Risk of the plug-in regression predictor `Π_j N(ỹ_j; f̂(u_j))`,
/// `f̂ = Σ c_i x_i φ_i`, in its per-coordinate and joint forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluginForms {
    /// Average of the `m` single-location log ratios, sampling `Ỹ`.
    pub individual: McEstimate,
    /// Joint KL between the product densities given `Y`.
    pub simultaneous: McEstimate,
}

pub fn individual_vs_simultaneous_plugin(
    theta: &[f64],
    shrink: &[f64],
    sizes: &DesignSizes,
    replicates: usize,
    seed: u64,
) -> Result<PluginForms> {
    check_len(sizes.n(), theta.len())?;
    check_len(sizes.n(), shrink.len())?;
    check_shrink(shrink)?;
    check_replicates(replicates, 2)?;
    let grid = RegressionGrid::new(*sizes)?;
    let (f_past, f_future) = (grid.eval_past(theta), grid.eval_future(theta));
    let m = sizes.m() as f64;
    let fit = |y: &[f64]| -> Vec<f64> {
        let x = grid.to_sequence(y);
        let est: Vec<f64> = x.iter().zip(shrink).map(|(x, c)| c * x).collect();
        grid.eval_future(&est)
    };

    let individual = run_replicates(replicates, seed, 0, || (), |_, rng| {
        let (y, ytilde) = draw_regression_pair(&grid, &f_past, &f_future, rng);
        let fhat = fit(&y);
        let per_location: f64 = ytilde
            .iter()
            .zip(f_future.iter().zip(&fhat))
            .map(|(yt, (f, g))| 0.5 * ((yt - g).powi(2) - (yt - f).powi(2)))
            .sum();
        per_location / m
    });
    let simultaneous = run_replicates(replicates, seed, 1, || (), |_, rng| {
        let y: Vec<f64> = f_past.iter().map(|f| f + normal(rng)).collect();
        let fhat = fit(&y);
        let dist2: f64 = f_future.iter().zip(&fhat).map(|(f, g)| (f - g).powi(2)).sum();
        0.5 * dist2 / m
    });
    Ok(PluginForms {
        individual,
        simultaneous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{linear_risk, plugin_risk, uniform_prior_risk};

    fn sizes(n: usize, m: usize) -> DesignSizes {
        DesignSizes::new(n, m).unwrap()
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sqrt()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let (a, b) = xs.split_at(313);
        let mut ma = Moments::default();
        let mut mb = Moments::default();
        a.iter().for_each(|x| ma.push(*x));
        b.iter().for_each(|x| mb.push(*x));
        let merged = ma.merge(mb);
        assert_eq!(merged.count, all.count);
        assert!((merged.mean - all.mean).abs() < 1e-12);
        assert!((merged.m2 - all.m2).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let theta = vec![0.1; 9];
        let prior = DiagonalPrior::new(vec![0.05; 9]).unwrap();
        let sz = sizes(9, 18);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_linear_risk(&theta, &prior, &sz, 10_000, 7).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| mc_linear_risk(&theta, &prior, &sz, 10_000, 7).unwrap());
        assert_eq!(serial.mean.to_bits(), parallel.mean.to_bits());
        assert_eq!(serial.std_error.to_bits(), parallel.std_error.to_bits());
        let other = mc_linear_risk(&theta, &prior, &sz, 10_000, 8).unwrap();
        assert_ne!(serial.mean, other.mean);
    }

    #[test]
    fn simulated_noise_moments() {
        let n = 5;
        let sz = sizes(n, 15);
        let reps = 20_000;
        let grid = RegressionGrid::new(sz).unwrap();
        let theta = vec![0.0; n];
        let (fp, ff) = (grid.eval_past(&theta), grid.eval_future(&theta));
        for i in 0..n {
            let mean = run_replicates(reps, 3, 0, || (), |_, rng| draw_regression_pair(&grid, &fp, &ff, rng).0[i]);
            assert!(mean.z_score(0.0) < 4.0);
            let var = run_replicates(reps, 3, 0, || (), |_, rng| {
                draw_regression_pair(&grid, &fp, &ff, rng).0[i].powi(2)
            });
            assert!(var.z_score(1.0) < 4.0, "var z = {}", var.z_score(1.0));
            let xvar = run_replicates(reps, 5, 0, || (), |_, rng| {
                let (y, _) = draw_regression_pair(&grid, &fp, &ff, rng);
                grid.to_sequence(&y)[i].powi(2)
            });
            assert!(xvar.z_score(1.0 / n as f64) < 4.0);
        }
    }

    #[test]
    fn transformed_covariance_is_scaled_identity() {
        // sample covariance of x = Φ_Aᵗ y / n under θ = 0, entry by entry
        let n = 5;
        let sz = sizes(n, n);
        let reps = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let xs: Vec<Vec<f64>> = (0..reps)
            .map(|_| {
                let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
                crate::model::sequence_transform(&y, &sz).unwrap()
            })
            .collect();
        for p in 0..n {
            for q in 0..n {
                let prods: Vec<f64> = xs.iter().map(|x| x[p] * x[q]).collect();
                let mean = prods.iter().sum::<f64>() / reps as f64;
                let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
                let se = (var / reps as f64).sqrt();
                let want = if p == q { 1.0 / n as f64 } else { 0.0 };
                assert!((mean - want).abs() < 3.5 * se, "({p},{q}) {mean} ± {se}");
            }
        }
    }

    #[test]
    fn simulate_pair_shapes_and_grid_checks() {
        let (y, yt) = simulate_pair(&[0.0; 5], &sizes(5, 10), 1).unwrap();
        assert_eq!((y.len(), yt.len()), (5, 10));
        assert!(simulate_pair(&[0.0; 4], &sizes(4, 8), 1).is_err());
        assert!(simulate_pair(&[0.0; 5], &sizes(5, 7), 1).is_err());
    }

    #[test]
    fn linear_risk_matches_closed_form() {
        let sz = sizes(50, 50);
        let theta = vec![0.1; 50];
        let prior = DiagonalPrior::new(vec![0.05; 50]).unwrap();
        let est = mc_linear_risk(&theta, &prior, &sz, 100_000, 11).unwrap();
        let closed = linear_risk(&theta, &prior, &sz).unwrap();
        assert!(est.z_score(closed) < 3.0, "{est:?} vs {closed}");

        let flipped: Vec<f64> = theta.iter().map(|t| -t).collect();
        let est2 = mc_linear_risk(&flipped, &prior, &sz, 100_000, 12).unwrap();
        assert!(est.joint_z(&est2) < 3.0);
    }

    #[test]
    fn truth_centered_prior_at_zero() {
        let sz = sizes(7, 14);
        let est = mc_linear_risk(&[0.0; 7], &DiagonalPrior::zeros(7), &sz, 1000, 1).unwrap();
        assert!(est.z_score(0.0) <= 3.0);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn replicate_minimums() {
        let sz = sizes(3, 3);
        assert!(mc_linear_risk(&[0.0; 3], &DiagonalPrior::zeros(3), &sz, 999, 1).is_err());
        let spec = EllipsoidSpec::l2_ball(3, 1.0).unwrap();
        assert!(mc_prior_tail(&DiagonalPrior::zeros(3), &spec, 9_999, 1).is_err());
    }

    #[test]
    fn uniform_and_plugin_estimates() {
        let sz = sizes(20, 40);
        let theta: Vec<f64> = (0..20).map(|i| 0.3 / (1.0 + i as f64)).collect();
        let u = mc_uniform_risk(&theta, &sz, 20_000, 2).unwrap();
        assert!(u.z_score(uniform_prior_risk(&sz)) < 4.0);
        let c: Vec<f64> = (0..20).map(|i| 1.0 / (1.0 + 0.2 * i as f64)).collect();
        let p = mc_plugin_risk(&theta, &c, &sz, 50_000, 3).unwrap();
        assert!(p.z_score(plugin_risk(&theta, &c, &sz).unwrap()) < 4.0);
    }

    #[test]
    fn equivalence_small_grid() {
        let sz = sizes(5, 15);
        let chk = mc_equivalence_check(&[0.0; 5], &sz, 10_000, 21).unwrap();
        let target = uniform_prior_risk(&sz);
        assert!(chk.regression.joint_z(&chk.sequence) < 3.0);
        assert!(chk.regression.z_score(target) < 3.0);
        assert!(chk.sequence.z_score(target) < 3.0);
    }

    #[test]
    fn noise_coordinates_cancel_in_regression_density() {
        // log p(ỹ | f) = log p(x̃ | θ) + log p(z̃) + log J, exactly
        for (n, m) in [(5usize, 15usize), (9, 18)] {
            let sz = sizes(n, m);
            let grid = RegressionGrid::new(sz).unwrap();
            let theta: Vec<f64> = (0..n).map(|i| 0.4 - 0.1 * i as f64).collect();
            let (fp, ff) = (grid.eval_past(&theta), grid.eval_future(&theta));
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..20 {
                let (_, yt) = draw_regression_pair(&grid, &fp, &ff, &mut rng);
                let (xt, zt) = grid.split_future(&yt);
                let lhs = log_normal_density(&yt, &ff, 1.0);
                let rhs = log_normal_density(&xt, &theta, sz.v_m())
                    + log_centered_density(&zt, sz.v_m())
                    + grid.future_log_jacobian();
                assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn prior_tail_cases() {
        let n = 200;
        let spec = EllipsoidSpec::l2_ball(n, 1.0).unwrap();
        let zero = mc_prior_tail(&DiagonalPrior::zeros(n), &spec, 10_000, 4).unwrap();
        assert_eq!(zero.mean, 0.0);
        // E Σ θ_i² = 2C, well concentrated for n = 200
        let wide = DiagonalPrior::new(vec![2.0 / n as f64; n]).unwrap();
        let est = mc_prior_tail(&wide, &spec, 10_000, 4).unwrap();
        assert!(est.mean > 0.5);
    }

    #[test]
    fn plugin_forms_agree() {
        let sz = sizes(5, 10);
        let one = individual_vs_simultaneous_plugin(&[0.0; 5], &[1.0; 5], &sz, 20_000, 8).unwrap();
        assert!(one.individual.z_score(0.5) < 4.0);
        assert!(one.simultaneous.z_score(0.5) < 4.0);
        let zero = individual_vs_simultaneous_plugin(&[0.0; 5], &[0.0; 5], &sz, 2_000, 8).unwrap();
        assert_eq!(zero.simultaneous.mean, 0.0);
        assert!(zero.individual.z_score(0.0) < 4.0);
    }

    #[test]
    fn standard_error_scaling() {
        let sz = sizes(10, 10);
        let theta = vec![0.2; 10];
        let prior = DiagonalPrior::new(vec![0.01; 10]).unwrap();
        let a = mc_linear_risk(&theta, &prior, &sz, 10_000, 31).unwrap();
        let b = mc_linear_risk(&theta, &prior, &sz, 40_000, 31).unwrap();
        let ratio = b.std_error / a.std_error;
        assert!((ratio - 0.5).abs() < 0.1, "{ratio}");
    }
}
