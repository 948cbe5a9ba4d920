use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_len, ConstraintProvider, Dataset};
use crate::el::ConstraintMatrix;
use crate::error::{domain, input, Result};

/// Conventional asymmetry constant of the g-and-k family.
pub const GK_DEFAULT_C: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkParams {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub k: f64,
    pub c: f64,
}

impl GkParams {
    /// `(A, B, g, k)` with the default `c`.
    pub fn new(a: f64, b: f64, g: f64, k: f64) -> Self {
        Self { a, b, g, k, c: GK_DEFAULT_C }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.a, self.b, self.g, self.k, self.c].iter().all(|v| v.is_finite()) {
            return domain("non-finite g-and-k parameter");
        }
        if self.b <= 0.0 {
            return domain(format!("g-and-k scale B must be > 0, got {}", self.b));
        }
        if self.k <= -0.5 {
            return domain(format!("g-and-k kurtosis k must be > -0.5, got {}", self.k));
        }
        Ok(())
    }
}

fn std_normal_quantile(r: f64) -> f64 {
    Normal::standard().inverse_cdf(r)
}

/// `Q(r) = A + B (1 + c tanh(g z / 2)) (1 + z^2)^k z` with `z = Phi^{-1}(r)`.
///
/// `tanh(g z / 2)` is the same as `(1 - e^{-g z}) / (1 + e^{-g z})` without
/// the overflow for large `|g z|`.
pub fn gk_quantile(r: f64, p: &GkParams) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("quantile level must lie in (0, 1), got {r}"));
    }
    let z = std_normal_quantile(r);
    Ok(quantile_at_z(z, p))
}

fn quantile_at_z(z: f64, p: &GkParams) -> f64 {
    p.a + p.b * (1.0 + p.c * (0.5 * p.g * z).tanh()) * (1.0 + z * z).powf(p.k) * z
}

/// Indicator percentile equations `1{y_i <= Q(probs_j)} - probs_j`.
pub fn gk_percentile_constraints(y: &[f64], p: &GkParams, probs: &[f64]) -> Result<ConstraintMatrix> {
    p.validate()?;
    check_probs(probs)?;
    let cuts: Vec<f64> = probs.iter().map(|&r| quantile_at_z(std_normal_quantile(r), p)).collect();
    let mut data = Vec::with_capacity(y.len() * probs.len());
    for &v in y {
        for (cut, pr) in cuts.iter().zip(probs) {
            data.push(if v <= *cut { 1.0 - pr } else { -pr });
        }
    }
    ConstraintMatrix::new(y.len(), probs.len(), data)
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return input("no percentile levels");
    }
    if probs.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return input("percentile levels must lie in (0, 1)");
    }
    if probs.windows(2).any(|w| w[0] >= w[1]) {
        return input("percentile levels must be strictly increasing");
    }
    Ok(())
}

/// Percentile constraints for `theta = (A, B, g, k)` with a fixed `c`.
#[derive(Debug, Clone)]
pub struct GkPercentiles {
    pub probs: Vec<f64>,
    pub c: f64,
}

impl GkPercentiles {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        Ok(Self { probs, c: GK_DEFAULT_C })
    }

    /// `p` equispaced interior levels `j / (p + 1)`; `p = 3` gives the quartiles.
    pub fn equispaced(p: usize) -> Result<Self> {
        if p == 0 {
            return input("need at least one percentile");
        }
        Self::new((1..=p).map(|j| j as f64 / (p + 1) as f64).collect())
    }
}

impl ConstraintProvider for GkPercentiles {
    fn n_params(&self) -> usize {
        4
    }

    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix> {
        check_len(theta, 4)?;
        let p = GkParams { a: theta[0], b: theta[1], g: theta[2], k: theta[3], c: self.c };
        gk_percentile_constraints(data.as_iid()?, &p, &self.probs)
    }
}
