//! Constraints for ARCH(1) and GARCH(1,1) series.

use super::{check_len, ConstraintProvider, Dataset};
use crate::el::ConstraintMatrix;
use crate::error::{domain, input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchVariant {
    /// First three moments of the reconstructed innovations.
    Moments,
    /// Innovation variance plus the lag-one products `eps_t eps_{t-1}` and `eps_t y_{t-1}`.
    Correlations,
}

fn check_arch(alpha0: f64, alpha1: f64) -> Result<()> {
    if !(alpha0 > 0.0 && alpha1 >= 0.0 && alpha0 + alpha1 <= 1.0) {
        return domain(format!("ARCH parameters ({alpha0}, {alpha1}) outside the simplex"));
    }
    Ok(())
}

/// Reconstructed innovations `eps_t = y_t / sqrt(alpha0 + alpha1 y_{t-1}^2)`, `t >= 2`.
pub fn arch_innovations(y: &[f64], alpha0: f64, alpha1: f64) -> Result<Vec<f64>> {
    check_arch(alpha0, alpha1)?;
    Ok(y.windows(2).map(|w| w[1] / (alpha0 + alpha1 * w[0] * w[0]).sqrt()).collect())
}

/// ARCH(1) constraints from reconstructed innovations.
///
/// `Moments` has one row per `t = 2..T`. `Correlations` needs `eps_{t-1}` and
/// so starts at `t = 3`.
pub fn arch_residuals(y: &[f64], alpha0: f64, alpha1: f64, variant: ArchVariant) -> Result<ConstraintMatrix> {
    let eps = arch_innovations(y, alpha0, alpha1)?;
    if eps.len() < 2 {
        return input(format!("series of length {} is too short", y.len()));
    }
    match variant {
        ArchVariant::Moments => {
            let data = eps.iter().flat_map(|&e| [e, e * e - 1.0, e * e * e]).collect();
            ConstraintMatrix::new(eps.len(), 3, data)
        }
        ArchVariant::Correlations => {
            // eps[i] is eps_{i+2}; its lagged observation is y[i]
            let data = (1..eps.len())
                .flat_map(|i| {
                    let e = eps[i];
                    [e * e - 1.0, e * eps[i - 1], e * y[i]]
                })
                .collect();
            ConstraintMatrix::new(eps.len() - 1, 3, data)
        }
    }
}

fn check_garch(alpha0: f64, alpha1: f64, beta1: f64) -> Result<()> {
    if !(alpha0 > 0.0 && alpha1 >= 0.0 && beta1 >= 0.0 && alpha1 + beta1 < 1.0) {
        return domain(format!("GARCH parameters ({alpha0}, {alpha1}, {beta1}) outside the stationary region"));
    }
    Ok(())
}

/// Conditional variances `sigma_t^2` and their gradients in
/// `(alpha0, alpha1, beta1)`, started at the stationary variance.
pub fn garch_variance_path(y: &[f64], alpha0: f64, alpha1: f64, beta1: f64) -> Result<Vec<(f64, [f64; 3])>> {
    check_garch(alpha0, alpha1, beta1)?;
    let gap = 1.0 - alpha1 - beta1;
    let mut s2 = alpha0 / gap;
    let mut d = [1.0 / gap, alpha0 / (gap * gap), alpha0 / (gap * gap)];
    let mut out = Vec::with_capacity(y.len());
    for &yt in y {
        out.push((s2, d));
        let y2 = yt * yt;
        d = [1.0 + beta1 * d[0], y2 + beta1 * d[1], s2 + beta1 * d[2]];
        s2 = alpha0 + alpha1 * y2 + beta1 * s2;
    }
    Ok(out)
}

/// Gaussian quasi-score rows `(y_t^2 / sigma_t^2 - 1) / (2 sigma_t^2) * grad sigma_t^2`.
pub fn garch_score(y: &[f64], alpha0: f64, alpha1: f64, beta1: f64) -> Result<ConstraintMatrix> {
    let path = garch_variance_path(y, alpha0, alpha1, beta1)?;
    let data = y
        .iter()
        .zip(&path)
        .flat_map(|(yt, (s2, d))| {
            let c = (yt * yt / s2 - 1.0) / (2.0 * s2);
            [c * d[0], c * d[1], c * d[2]]
        })
        .collect();
    ConstraintMatrix::new(y.len(), 3, data)
}

/// Gaussian log-likelihood of a GARCH(1,1) series, up to the `2 pi` constant.
pub fn garch_loglik(y: &[f64], alpha0: f64, alpha1: f64, beta1: f64) -> Result<f64> {
    let path = garch_variance_path(y, alpha0, alpha1, beta1)?;
    Ok(y.iter().zip(&path).map(|(yt, (s2, _))| -0.5 * s2.ln() - yt * yt / (2.0 * s2)).sum())
}

/// `theta = (alpha0, alpha1)`.
#[derive(Debug, Clone, Copy)]
pub struct ArchResiduals {
    pub variant: ArchVariant,
}

impl ConstraintProvider for ArchResiduals {
    fn n_params(&self) -> usize {
        2
    }

    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix> {
        check_len(theta, 2)?;
        arch_residuals(data.as_series()?, theta[0], theta[1], self.variant)
    }
}

/// `theta = (alpha0, alpha1, beta1)`.
#[derive(Debug, Clone, Copy)]
pub struct GarchScore;

impl ConstraintProvider for GarchScore {
    fn n_params(&self) -> usize {
        3
    }

    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix> {
        check_len(theta, 3)?;
        garch_score(data.as_series()?, theta[0], theta[1], theta[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathfn::RngStream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn unit_arch_is_identity() {
        let y = noise(1, 20);
        let h = arch_residuals(&y, 1.0, 0.0, ArchVariant::Moments).unwrap();
        assert_eq!(h.n(), 19);
        assert_eq!(h.column(0), y[1..].to_vec());
        let h = arch_residuals(&y, 1.0, 0.0, ArchVariant::Correlations).unwrap();
        assert_eq!(h.n(), 18);
        for i in 0..18 {
            assert_eq!(h.get(i, 1), y[i + 2] * y[i + 1]);
            assert_eq!(h.get(i, 2), y[i + 2] * y[i + 1]);
        }
    }

    #[test]
    fn constant_series_violates_hull() {
        let y = vec![0.7; 50];
        let h = arch_residuals(&y, 0.5, 0.3, ArchVariant::Moments).unwrap();
        let c = h.column(1);
        assert!(c.iter().all(|v| *v == c[0]) && c[0] != 0.0);
        let s = crate::el::el_solve(&h, &Default::default());
        assert_eq!(s.status, crate::el::ElStatus::HullViolation);
    }

    #[test]
    fn support_is_enforced() {
        let y = noise(2, 10);
        assert!(arch_residuals(&y, 0.0, 0.5, ArchVariant::Moments).is_err());
        assert!(arch_residuals(&y, 0.7, 0.4, ArchVariant::Moments).is_err());
        assert!(arch_residuals(&y, 0.5, -0.1, ArchVariant::Moments).is_err());
        assert!(garch_score(&y, 0.1, 0.5, 0.5).is_err());
        assert!(garch_score(&y, -0.1, 0.1, 0.5).is_err());
    }

    /// Per-t log-likelihood contributions from a straight recursion, used as a
    /// finite-difference oracle.
    fn loglik_terms(y: &[f64], p: [f64; 3]) -> Vec<f64> {
        let mut s2 = p[0] / (1.0 - p[1] - p[2]);
        let mut out = Vec::new();
        for &yt in y {
            out.push(-0.5 * s2.ln() - yt * yt / (2.0 * s2));
            s2 = p[0] + p[1] * yt * yt + p[2] * s2;
        }
        out
    }

    fn check_fd(y: &[f64], p: [f64; 3]) {
        let h = garch_score(y, p[0], p[1], p[2]).unwrap();
        let step = 1e-6;
        for j in 0..3 {
            let mut up = p;
            let mut dn = p;
            up[j] += step;
            dn[j] -= step;
            let lu = loglik_terms(y, up);
            let ld = loglik_terms(y, dn);
            for t in 0..y.len() {
                let fd = (lu[t] - ld[t]) / (2.0 * step);
                let an = h.get(t, j);
                assert!((an - fd).abs() <= 1e-4 * fd.abs() + 1e-7, "t={t} j={j} an={an} fd={fd}");
            }
        }
    }

    #[test]
    fn garch_score_matches_finite_differences() {
        check_fd(&noise(3, 200), [0.1, 0.1, 0.8]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn garch_score_fd_random(seed in 0u64..10_000, a0 in 0.05f64..2.0, a1 in 0.01f64..0.5, frac in 0.05f64..0.9) {
            let b1 = (1.0 - a1) * frac * 0.98;
            let y: Vec<f64> = noise(seed, 60).iter().map(|v| v * a0.sqrt()).collect();
            check_fd(&y, [a0, a1, b1]);
        }
    }

    #[test]
    fn garch_without_beta_is_arch_score() {
        let y = noise(4, 100);
        let (a0, a1) = (0.4, 0.35);
        let g = garch_score(&y, a0, a1, 0.0).unwrap();
        let a = arch_residuals(&y, a0, a1, ArchVariant::Moments).unwrap();
        for t in 1..y.len() {
            let s2 = a0 + a1 * y[t - 1] * y[t - 1];
            let c = a.get(t - 1, 1) / (2.0 * s2);
            assert!((g.get(t, 0) - c).abs() < 1e-12);
            assert!((g.get(t, 1) - c * y[t - 1] * y[t - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn score_means_vanish_at_mle() {
        // Simulate, then locate the MLE by a shrinking pattern search, a
        // derivative-free oracle independent of the analytic score.
        let mut rng = RngStream::new(77, 0).rng();
        let truth: [f64; 3] = [0.2, 0.15, 0.6];
        let t_len = 2000;
        let mut s2 = truth[0] / (1.0 - truth[1] - truth[2]);
        let mut y = Vec::with_capacity(t_len);
        for _ in 0..t_len {
            let v = s2.sqrt() * rng.sample::<f64, _>(StandardNormal);
            y.push(v);
            s2 = truth[0] + truth[1] * v * v + truth[2] * s2;
        }
        let obj = |p: [f64; 3]| loglik_terms(&y, p).iter().sum::<f64>();
        let feasible = |p: [f64; 3]| p[0] > 0.0 && p[1] >= 0.0 && p[2] >= 0.0 && p[1] + p[2] < 0.999;
        let mut best = truth;
        let mut fbest = obj(best);
        let mut step = 0.05;
        while step > 1e-9 {
            let mut improved = false;
            for j in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut c = best;
                    c[j] += s * step;
                    if feasible(c) {
                        let fc = obj(c);
                        if fc > fbest {
                            best = c;
                            fbest = fc;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let h = garch_score(&y, best[0], best[1], best[2]).unwrap();
        let bound = 2.0 / (t_len as f64).sqrt();
        for m in h.column_means() {
            assert!(m.abs() < bound, "{m} vs {bound}");
        }
    }
}
