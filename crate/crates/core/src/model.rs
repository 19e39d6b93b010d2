//! Design sizes, the trigonometric basis and the map from equally spaced
//! regression data to the Gaussian sequence model.
//!
//! The `n`-dimensional basis is `φ_0, φ_1, …, φ_{n-1}` with
//! `φ_0 ≡ 1`, `φ_{2k-1}(t) = √2 sin(2πkt)`, `φ_{2k}(t) = √2 cos(2πkt)`.
//! For odd `n` the design matrix at `t_i = i/n` satisfies `ΦᵗΦ = n I` exactly,
//! which is what makes `x = Φᵗy / n` an unbiased `N(θ, I/n)` observation.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Past and future sample counts with the derived noise variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSizes {
    n: usize,
    m: usize,
}

impl DesignSizes {
    /// Requires `1 ≤ n ≤ m`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDesign("n must be positive".into()));
        }
        if m < n {
            return Err(Error::InvalidDesign(format!(
                "future size m={m} must be at least n={n}"
            )));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `1/n`, the variance of each coordinate of the past observation.
    pub fn v_n(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `1/m`, the variance of each coordinate of the future observation.
    pub fn v_m(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// `1/(n+m)`, the variance of the pooled observation.
    pub fn v_nm(&self) -> f64 {
        1.0 / (self.n + self.m) as f64
    }

    /// Both grids usable at once: `n` odd and `m` a multiple of `n`.
    pub fn is_grid_compatible(&self) -> bool {
        self.n % 2 == 1 && self.m.is_multiple_of(self.n)
    }

    pub fn require_grid(&self) -> Result<()> {
        if self.n.is_multiple_of(2) {
            return Err(Error::InvalidDesign(format!(
                "regression grid needs odd n, got {}",
                self.n
            )));
        }
        if !self.m.is_multiple_of(self.n) {
            return Err(Error::InvalidDesign(format!(
                "regression grid needs m a multiple of n, got n={} m={}",
                self.n, self.m
            )));
        }
        Ok(())
    }
}

/// Centered Gaussian prior with diagonal covariance `diag(s2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPrior {
    s2: Vec<f64>,
}

impl DiagonalPrior {
    pub fn new(s2: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = s2.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "prior variance s2[{i}] = {v} must be finite and nonnegative"
            )));
        }
        Ok(Self { s2 })
    }

    /// Point mass at the origin.
    pub fn zeros(n: usize) -> Self {
        Self { s2: vec![0.0; n] }
    }

    pub fn variances(&self) -> &[f64] {
        &self.s2
    }

    pub fn len(&self) -> usize {
        self.s2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s2.is_empty()
    }
}

/// Per-coordinate Gaussian predictive density for the future observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Orthonormal trigonometric basis on `[0, 1]`.
pub fn trig_basis(j: usize, t: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let k = j.div_ceil(2) as f64;
    let arg = 2.0 * PI * k * t;
    if j % 2 == 1 {
        SQRT_2 * arg.sin()
    } else {
        SQRT_2 * arg.cos()
    }
}

/// `φ_j(i/len)` with the phase reduced modulo one in integer arithmetic.
pub(crate) fn trig_basis_on_grid(j: usize, i: usize, len: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let k = j.div_ceil(2) as u64;
    let phase = (k * i as u64) % len as u64;
    let arg = 2.0 * PI * phase as f64 / len as f64;
    if j % 2 == 1 {
        SQRT_2 * arg.sin()
    } else {
        SQRT_2 * arg.cos()
    }
}

/// Row-major `rows × cols` matrix with entries `φ_j(i/rows)`, `i = 1..=rows`.
pub fn design_matrix(rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for i in 1..=rows {
        for j in 0..cols {
            out.push(trig_basis_on_grid(j, i, rows));
        }
    }
    out
}

/// `f(t) = Σ θ_j φ_j(t)`.
pub fn synthesize_f(theta: &[f64], t: f64) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(j, th)| th * trig_basis(j, t))
        .sum()
}

/// Maps regression responses at `t_i = i/n` to `x = Φ_Aᵗ y / n`.
pub fn sequence_transform(y: &[f64], sizes: &DesignSizes) -> Result<Vec<f64>> {
    let n = sizes.n();
    if n.is_multiple_of(2) {
        return Err(Error::InvalidDesign(format!(
            "sequence transform needs odd n, got {n}"
        )));
    }
    check_len(n, y.len())?;
    let scale = 1.0 / n as f64;
    Ok((0..n)
        .map(|j| {
            y.iter()
                .enumerate()
                .map(|(i, yi)| trig_basis_on_grid(j, i + 1, n) * yi)
                .sum::<f64>()
                * scale
        })
        .collect())
}

/// KL cost of predicting with the truncated `f_n` instead of `f`:
/// `Σ tail² / (2m)`.
pub fn truncation_bias(theta_tail: &[f64], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    Ok(theta_tail.iter().map(|t| t * t).sum::<f64>() / (2.0 * m as f64))
}

/// Precomputed design matrices for moving between regression space and the
/// sequence model on both the past grid `i/n` and the future grid `j/m`.
#[derive(Debug, Clone)]
pub struct RegressionGrid {
    sizes: DesignSizes,
    /// `n × n`, entries `φ_j(i/n)`.
    past: Vec<f64>,
    /// `m × m`, entries `ψ_j(j'/m)`; the first `n` columns are `Φ_B`.
    future: Vec<f64>,
}

impl RegressionGrid {
    pub fn new(sizes: DesignSizes) -> Result<Self> {
        sizes.require_grid()?;
        let (n, m) = (sizes.n(), sizes.m());
        let past = design_matrix(n, n);
        let mut future = Vec::with_capacity(m * m);
        for i in 1..=m {
            for j in 0..m {
                future.push(completion_basis(j, i, m));
            }
        }
        Ok(Self { sizes, past, future })
    }

    pub fn sizes(&self) -> &DesignSizes {
        &self.sizes
    }

    /// `f_n(t_i)` for `i = 1..=n`.
    pub fn eval_past(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.sizes.n();
        mat_vec(&self.past, n, n, theta)
    }

    /// `f_n(u_j)` for `j = 1..=m`.
    pub fn eval_future(&self, theta: &[f64]) -> Vec<f64> {
        let (n, m) = (self.sizes.n(), self.sizes.m());
        (0..m)
            .map(|i| {
                self.future[i * m..i * m + n]
                    .iter()
                    .zip(theta)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `x = Φ_Aᵗ y / n`.
    pub fn to_sequence(&self, y: &[f64]) -> Vec<f64> {
        let n = self.sizes.n();
        mat_t_vec(&self.past, n, n, y, 1.0 / n as f64)
    }

    /// `(x̃, z̃)` from `Ψᵗ ỹ / m`: the first `n` coordinates carry θ, the
    /// remaining `m - n` are pure noise.
    pub fn split_future(&self, ytilde: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.sizes.n(), self.sizes.m());
        let mut all = mat_t_vec(&self.future, m, m, ytilde, 1.0 / m as f64);
        let z = all.split_off(n);
        (all, z)
    }

    /// `log |det(Ψᵗ/m)|`, the log-Jacobian of `ỹ ↦ (x̃, z̃)`.
    pub fn future_log_jacobian(&self) -> f64 {
        let m = self.sizes.m() as f64;
        -0.5 * m * m.ln()
    }
}

/// Full `m`-point orthogonal basis at `u = i/m`. For even `m` the top column
/// is the Nyquist cosine `(-1)^i`, since `sin(πi)` vanishes on the grid.
fn completion_basis(j: usize, i: usize, m: usize) -> f64 {
    if m.is_multiple_of(2) && j == m - 1 {
        if i.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    } else {
        trig_basis_on_grid(j, i, m)
    }
}

fn mat_vec(a: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| a[i * cols..(i + 1) * cols].iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn mat_t_vec(a: &[f64], rows: usize, cols: usize, v: &[f64], scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        let vi = v[i];
        for (o, aij) in out.iter_mut().zip(&a[i * cols..(i + 1) * cols]) {
            *o += aij * vi;
        }
    }
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut g = vec![0.0; cols * cols];
        for r in 0..rows {
            let row = &a[r * cols..(r + 1) * cols];
            for p in 0..cols {
                for q in 0..cols {
                    g[p * cols + q] += row[p] * row[q];
                }
            }
        }
        g
    }

    #[test]
    fn basis_values() {
        assert_eq!(trig_basis(0, 0.37), 1.0);
        assert!((trig_basis(1, 0.25) - SQRT_2).abs() < 1e-15);
        assert!((trig_basis(2, 0.5) + SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn grid_basis_agrees_with_real_argument() {
        for n in [7usize, 31] {
            for j in 0..n {
                for i in 1..=n {
                    let a = trig_basis_on_grid(j, i, n);
                    let b = trig_basis(j, i as f64 / n as f64);
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn past_gram_is_n_identity_for_odd_n() {
        for n in [3usize, 5, 7, 9, 11, 25, 101, 255, 501] {
            let a = design_matrix(n, n);
            let g = gram(&a, n, n);
            for p in 0..n {
                for q in 0..n {
                    let want = if p == q { n as f64 } else { 0.0 };
                    assert!(
                        (g[p * n + q] - want).abs() < 1e-9,
                        "n={n} entry ({p},{q}) = {}",
                        g[p * n + q]
                    );
                }
            }
        }
    }

    #[test]
    fn past_gram_n1001_sampled_entries() {
        let n = 1001;
        let a = design_matrix(n, n);
        for &(p, q) in &[(0, 0), (0, 1), (1, 2), (500, 500), (999, 1000), (1000, 1000), (3, 998)] {
            let s: f64 = (0..n).map(|r| a[r * n + p] * a[r * n + q]).sum();
            let want = if p == q { n as f64 } else { 0.0 };
            assert!((s - want).abs() < 1e-9, "({p},{q}) -> {s}");
        }
    }

    #[test]
    fn future_gram_is_m_identity() {
        for (n, m) in [(5usize, 15usize), (25, 50), (9, 9), (3, 12)] {
            let grid = RegressionGrid::new(DesignSizes::new(n, m).unwrap()).unwrap();
            let g = gram(&grid.future, m, m);
            for p in 0..m {
                for q in 0..m {
                    let want = if p == q { m as f64 } else { 0.0 };
                    assert!((g[p * m + q] - want).abs() < 1e-9, "n={n} m={m} ({p},{q})");
                }
            }
            // Φ_B is the leading block
            let phi_b = design_matrix(m, n);
            for i in 0..m {
                for j in 0..n {
                    assert_eq!(grid.future[i * m + j], phi_b[i * n + j]);
                }
            }
        }
    }

    #[test]
    fn transform_of_constant_response() {
        let sizes = DesignSizes::new(5, 5).unwrap();
        let x = sequence_transform(&[1.0; 5], &sizes).unwrap();
        // direct evaluation of Φ_Aᵗ 1 / n
        let a = design_matrix(5, 5);
        for j in 0..5 {
            let direct: f64 = (0..5).map(|i| a[i * 5 + j]).sum::<f64>() / 5.0;
            assert!((x[j] - direct).abs() < 1e-14);
        }
        let want = [1.0, 0.0, 0.0, 0.0, 0.0];
        for (got, w) in x.iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_rejects_even_n_and_bad_length() {
        let even = DesignSizes::new(4, 4).unwrap();
        assert!(matches!(
            sequence_transform(&[0.0; 4], &even),
            Err(Error::InvalidDesign(_))
        ));
        let odd = DesignSizes::new(5, 5).unwrap();
        assert!(matches!(
            sequence_transform(&[0.0; 4], &odd),
            Err(Error::LengthMismatch { expected: 5, actual: 4 })
        ));
    }

    #[test]
    fn noiseless_round_trip() {
        let n = 21;
        let sizes = DesignSizes::new(n, n).unwrap();
        let theta: Vec<f64> = (0..n).map(|j| ((j * 7 % 5) as f64 - 2.0) / (j + 1) as f64).collect();
        let y: Vec<f64> = (1..=n).map(|i| synthesize_f(&theta, i as f64 / n as f64)).collect();
        let x = sequence_transform(&y, &sizes).unwrap();
        for (a, b) in x.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn synthesize_trivial_cases() {
        assert_eq!(synthesize_f(&[0.0; 9], 0.3), 0.0);
        let mut e1 = vec![0.0; 9];
        e1[0] = 1.0;
        for t in [0.0, 0.2, 0.77, 1.0] {
            assert_eq!(synthesize_f(&e1, t), 1.0);
        }
    }

    #[test]
    fn truncation_bias_values() {
        assert_eq!(truncation_bias(&[], 3).unwrap(), 0.0);
        assert_eq!(truncation_bias(&[1.0, 1.0], 4).unwrap(), 0.25);
        assert!(truncation_bias(&[1.0], 0).is_err());
    }

    #[test]
    fn truncation_bias_sobolev_tail_order() {
        // θ_i = i^{-(α+1/2)} beyond n, with m = n
        let alpha = 1.0;
        let bias = |n: usize| {
            let tail: Vec<f64> = (n + 1..200 * n).map(|i| (i as f64).powf(-(alpha + 0.5))).collect();
            let direct: f64 = tail.iter().map(|t| t * t).sum::<f64>() / (2.0 * n as f64);
            let b = truncation_bias(&tail, n).unwrap();
            assert!((b - direct).abs() <= 1e-15 * direct.max(1e-300));
            b
        };
        let (b1, b2) = (bias(100), bias(1000));
        // bias·n^{2α} stays bounded
        assert!(b2 * 1000f64.powf(2.0 * alpha) <= b1 * 100f64.powf(2.0 * alpha) * 1.01);
    }

    #[test]
    fn design_sizes_validation() {
        assert!(DesignSizes::new(0, 3).is_err());
        assert!(DesignSizes::new(5, 4).is_err());
        let s = DesignSizes::new(100, 300).unwrap();
        assert_eq!(s.v_n(), 0.01);
        assert_eq!(s.v_nm(), 1.0 / 400.0);
        assert!(s.v_n() > s.v_nm() && s.v_m() >= s.v_nm());
        assert!(!s.is_grid_compatible());
        assert!(DesignSizes::new(5, 15).unwrap().is_grid_compatible());
        assert!(DesignSizes::new(5, 12).unwrap().require_grid().is_err());
    }

    #[test]
    fn prior_rejects_negative() {
        assert!(DiagonalPrior::new(vec![0.0, -1e-3]).is_err());
        assert!(DiagonalPrior::new(vec![0.0, f64::NAN]).is_err());
        assert_eq!(DiagonalPrior::zeros(3).variances(), &[0.0; 3]);
    }
}
