//! Ellipsoidal parameter sets `{θ : Σ a_i² θ_i² ≤ C}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    L2Ball,
    Sobolev { alpha: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    weights: Vec<f64>,
    radius: f64,
    family: Family,
}

impl EllipsoidSpec {
    /// All weights one.
    pub fn l2_ball(n: usize, radius: f64) -> Result<Self> {
        Self::build(vec![1.0; n], radius, Family::L2Ball)
    }

    /// Weights `(2k)^α` on the `k`-th sine/cosine pair and `1` on the constant
    /// coordinate, i.e. `a = (1, 2^α, 2^α, 4^α, 4^α, …)`.
    pub fn sobolev(n: usize, alpha: f64, radius: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidEllipsoid(format!(
                "Sobolev smoothness must be positive, got {alpha}"
            )));
        }
        let weights = (0..n).map(|j| sobolev_weight(j, alpha)).collect();
        Self::build(weights, radius, Family::Sobolev { alpha })
    }

    /// Arbitrary weights; they must be positive, finite and nondecreasing.
    pub fn custom(weights: Vec<f64>, radius: f64) -> Result<Self> {
        Self::build(weights, radius, Family::Custom)
    }

    fn build(weights: Vec<f64>, radius: f64, family: Family) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidEllipsoid("no weights".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidEllipsoid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if let Some((i, a)) = weights
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::InvalidEllipsoid(format!(
                "weight a[{i}] = {a} must be positive and finite"
            )));
        }
        if let Some(i) = weights.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidEllipsoid(format!(
                "weights must be nondecreasing: a[{}] = {} > a[{}] = {}",
                i,
                weights[i],
                i + 1,
                weights[i + 1]
            )));
        }
        Ok(Self {
            weights,
            radius,
            family,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same weights, different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::build(self.weights.clone(), radius, self.family)
    }

    /// `Σ a_i² θ_i²`.
    pub fn quadratic_form(&self, theta: &[f64]) -> Result<f64> {
        check_len(self.weights.len(), theta.len())?;
        Ok(self
            .weights
            .iter()
            .zip(theta)
            .map(|(a, t)| a * a * t * t)
            .sum())
    }
}

pub(crate) fn sobolev_weight(j: usize, alpha: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        ((2 * j.div_ceil(2)) as f64).powf(alpha)
    }
}

/// Membership test; the boundary counts as inside.
pub fn ellipsoid_contains(theta: &[f64], spec: &EllipsoidSpec) -> Result<bool> {
    Ok(spec.quadratic_form(theta)? <= spec.radius())
}
