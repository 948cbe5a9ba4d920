//! Summary statistics for the ABC baseline.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{garch_loglik, garch_score, Dataset, Microsat};
use crate::error::{input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryStat {
    /// Sample mean; sufficient for the normal model.
    Mean,
    /// The seven octiles.
    GkOctiles,
    /// Least-squares intercept and slope of `y_t^2` on `y_{t-1}^2`.
    ArchLeastSquares,
    /// Mean of `log y_t^2` and the first two autocorrelations of `y_t^2`.
    ArchLogAcf,
    /// Gaussian maximum-likelihood estimate of `(alpha0, alpha1, beta1)`.
    GarchMle,
    /// Per-deme allele count, gene diversity and size variance, plus
    /// `(delta mu)^2` for every pair of demes, each averaged over loci.
    PopGen,
}

impl SummaryStat {
    pub fn name(self) -> &'static str {
        match self {
            SummaryStat::Mean => "mean",
            SummaryStat::GkOctiles => "gk-octiles",
            SummaryStat::ArchLeastSquares => "arch-ls",
            SummaryStat::ArchLogAcf => "arch-logacf",
            SummaryStat::GarchMle => "garch-mle",
            SummaryStat::PopGen => "popgen",
        }
    }

    pub fn compute(self, data: &Dataset) -> Result<Vec<f64>> {
        match self {
            SummaryStat::Mean => {
                let y = data.as_iid()?;
                Ok(vec![y.iter().sum::<f64>() / y.len() as f64])
            }
            SummaryStat::GkOctiles => octiles(data.as_iid()?),
            SummaryStat::ArchLeastSquares => arch_least_squares(data.as_series()?),
            SummaryStat::ArchLogAcf => arch_log_acf(data.as_series()?),
            SummaryStat::GarchMle => Ok(garch_mle(data.as_series()?)?.params.to_vec()),
            SummaryStat::PopGen => Ok(popgen_summaries(data.as_microsat()?)),
        }
    }
}

impl fmt::Display for SummaryStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SummaryStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SummaryStat::Mean,
            SummaryStat::GkOctiles,
            SummaryStat::ArchLeastSquares,
            SummaryStat::ArchLogAcf,
            SummaryStat::GarchMle,
            SummaryStat::PopGen,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Input(format!("unknown summary statistic {s:?}")))
    }
}

fn octiles(y: &[f64]) -> Result<Vec<f64>> {
    if y.len() < 8 {
        return input(format!("octiles need at least 8 observations, got {}", y.len()));
    }
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    // linear interpolation between order statistics
    let n = s.len() as f64;
    Ok((1..8)
        .map(|j| {
            let h = (n - 1.0) * j as f64 / 8.0;
            let lo = h.floor() as usize;
            let frac = h - lo as f64;
            s[lo] + frac * (s[(lo + 1).min(s.len() - 1)] - s[lo])
        })
        .collect())
}

fn arch_least_squares(y: &[f64]) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return input("autoregression needs at least 3 observations");
    }
    let x: Vec<f64> = y[..y.len() - 1].iter().map(|v| v * v).collect();
    let z: Vec<f64> = y[1..].iter().map(|v| v * v).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxz: f64 = x.iter().zip(&z).map(|(a, b)| (a - mx) * (b - mz)).sum();
    if sxx <= 0.0 {
        return input("lagged squares have no spread");
    }
    let slope = sxz / sxx;
    Ok(vec![mz - slope * mx, slope])
}

fn arch_log_acf(y: &[f64]) -> Result<Vec<f64>> {
    if y.len() < 4 {
        return input("autocorrelations need at least 4 observations");
    }
    let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
    let mean_log = sq.iter().map(|v| v.ln()).sum::<f64>() / sq.len() as f64;
    let m = sq.iter().sum::<f64>() / sq.len() as f64;
    let c0: f64 = sq.iter().map(|v| (v - m).powi(2)).sum();
    if c0.is_nan() || c0 <= 0.0 || !mean_log.is_finite() {
        return input("degenerate squared series");
    }
    let acf = |lag: usize| sq.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum::<f64>() / c0;
    Ok(vec![mean_log, acf(1), acf(2)])
}

/// Result of [`garch_mle`]. When the optimizer fails the moment-based starting
/// point is returned with `converged = false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchFit {
    pub params: [f64; 3],
    pub converged: bool,
}

/// Unconstrained coordinates: `alpha0 = e^u0` and `(alpha1, beta1)` the first
/// two shares of a softmax over `(u1, u2, 0)`, which keeps `alpha1 + beta1 < 1`.
fn garch_from_free(u: &DVector<f64>) -> [f64; 3] {
    let (e1, e2) = (u[1].exp(), u[2].exp());
    let den = 1.0 + e1 + e2;
    [u[0].exp(), e1 / den, e2 / den]
}

fn garch_to_free(p: [f64; 3]) -> DVector<f64> {
    let rest = 1.0 - p[1] - p[2];
    DVector::from_vec(vec![p[0].ln(), (p[1] / rest).ln(), (p[2] / rest).ln()])
}

/// Mean negative log-likelihood and its gradient in free coordinates.
fn garch_objective(y: &[f64], u: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let p = garch_from_free(u);
    if !(p[1] > 0.0 && p[2] > 0.0 && p[1] + p[2] < 1.0 && p[0].is_finite()) {
        return None;
    }
    let ll = garch_loglik(y, p[0], p[1], p[2]).ok()?;
    let g = garch_score(y, p[0], p[1], p[2]).ok()?.column_means();
    let n = y.len() as f64;
    let (a, b) = (p[1], p[2]);
    let grad = DVector::from_vec(vec![
        -g[0] * p[0],
        -(g[1] * a * (1.0 - a) - g[2] * a * b),
        -(-g[1] * a * b + g[2] * b * (1.0 - b)),
    ]);
    let f = -ll / n;
    (f.is_finite() && grad.iter().all(|v| v.is_finite())).then_some((f, grad))
}

/// Gaussian quasi-maximum likelihood for GARCH(1,1) by BFGS in unconstrained
/// coordinates, started from a moment match.
pub fn garch_mle(y: &[f64]) -> Result<GarchFit> {
    if y.len() < 10 {
        return input(format!("GARCH fit needs at least 10 observations, got {}", y.len()));
    }
    let v = y.iter().map(|x| x * x).sum::<f64>() / y.len() as f64;
    if !(v > 0.0 && v.is_finite()) {
        return input("series has no variance");
    }
    let start = [0.1 * v, 0.1, 0.8];
    let fallback = GarchFit { params: start, converged: false };
    let mut u = garch_to_free(start);
    let Some((mut f, mut g)) = garch_objective(y, &u) else {
        return Ok(fallback);
    };
    let mut h_inv = DMatrix::<f64>::identity(3, 3);
    for _ in 0..300 {
        if g.amax() < 1e-7 {
            return Ok(GarchFit { params: garch_from_free(&u), converged: true });
        }
        let mut d = -(&h_inv * &g);
        if g.dot(&d) >= 0.0 {
            h_inv = DMatrix::identity(3, 3);
            d = -g.clone();
        }
        let slope = g.dot(&d);
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-12 {
            let trial = &u + step * &d;
            if let Some((ft, gt)) = garch_objective(y, &trial) {
                if ft <= f + 1e-4 * step * slope {
                    next = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((un, fnew, gn)) = next else {
            break;
        };
        let s = &un - &u;
        let yk = &gn - &g;
        let sy = s.dot(&yk);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(3, 3);
            let left = &i - rho * &s * yk.transpose();
            let right = &i - rho * &yk * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        u = un;
        f = fnew;
        g = gn;
    }
    // Stalled line searches at a flat optimum still count when the gradient is small.
    if g.amax() < 1e-5 {
        return Ok(GarchFit { params: garch_from_free(&u), converged: true });
    }
    Ok(fallback)
}

fn popgen_summaries(data: &Microsat) -> Vec<f64> {
    let n_demes = data.scenario.n_demes() as usize;
    let mut per_deme = vec![[0.0f64; 3]; n_demes];
    let mut pair_dmu = vec![0.0; n_demes * (n_demes - 1) / 2];
    let k = data.loci.len() as f64;
    for locus in &data.loci {
        let mut mus = vec![0.0; n_demes];
        for d in 0..n_demes {
            let xs: Vec<i32> = locus.alleles.iter().zip(&locus.demes).filter(|(_, dm)| **dm as usize == d + 1).map(|(a, _)| *a).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mut counts: HashMap<i32, usize> = HashMap::new();
            for a in &xs {
                *counts.entry(*a).or_default() += 1;
            }
            let mean = xs.iter().map(|a| *a as f64).sum::<f64>() / n;
            let var = if n > 1.0 { xs.iter().map(|a| (*a as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let hom: f64 = counts.values().map(|c| (*c as f64 / n).powi(2)).sum();
            let diversity = if n > 1.0 { n / (n - 1.0) * (1.0 - hom) } else { 0.0 };
            per_deme[d][0] += counts.len() as f64 / k;
            per_deme[d][1] += diversity / k;
            per_deme[d][2] += var / k;
            mus[d] = mean;
        }
        let mut idx = 0;
        for a in 0..n_demes {
            for b in a + 1..n_demes {
                pair_dmu[idx] += (mus[a] - mus[b]).powi(2) / k;
                idx += 1;
            }
        }
    }
    per_deme.into_iter().flatten().chain(pair_dmu).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Locus, Scenario};
    use crate::mathfn::RngStream;
    use crate::simulate::sim_garch;

    #[test]
    fn octiles_of_a_grid() {
        let y: Vec<f64> = (0..=80).map(|i| i as f64).collect();
        assert_eq!(octiles(&y).unwrap(), vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
    }

    #[test]
    fn least_squares_recovers_an_exact_line() {
        // y_t^2 = 0.5 + 0.25 y_{t-1}^2 exactly
        let mut sq = vec![3.0f64];
        for _ in 0..10 {
            sq.push(0.5 + 0.25 * sq.last().unwrap());
        }
        let y: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
        let ls = arch_least_squares(&y).unwrap();
        assert!((ls[0] - 0.5).abs() < 1e-9 && (ls[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn log_acf_of_alternating_series() {
        let y: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let s = arch_log_acf(&y).unwrap();
        assert!((s[0] - 0.5 * 4f64.ln()).abs() < 1e-12);
        assert!((s[1] + 1.0).abs() < 1e-2);
        assert!((s[2] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn garch_mle_matches_a_pattern_search() {
        let y = sim_garch(&mut RngStream::new(21, 0).rng(), 2000, 0.2, 0.15, 0.6).unwrap();
        let fit = garch_mle(&y).unwrap();
        assert!(fit.converged);
        // The MLE should not be beaten by any small feasible perturbation.
        let ll = |p: [f64; 3]| garch_loglik(&y, p[0], p[1], p[2]).unwrap();
        let best = ll(fit.params);
        for j in 0..3 {
            for s in [-1e-3, 1e-3] {
                let mut q = fit.params;
                q[j] += s;
                assert!(ll(q) <= best + 1e-6, "coordinate {j}");
            }
        }
        assert!((fit.params[1] - 0.15).abs() < 0.1 && (fit.params[2] - 0.6).abs() < 0.25, "{:?}", fit.params);
    }

    #[test]
    fn garch_mle_reports_fallback_on_degenerate_input() {
        assert!(garch_mle(&[0.0; 50]).is_err());
        assert!(garch_mle(&[1.0; 5]).is_err());
    }

    #[test]
    fn popgen_summary_by_hand() {
        let loci = vec![Locus { alleles: vec![0, 0, 1, 3], demes: vec![1, 1, 2, 2] }];
        let s = popgen_summaries(&Microsat::new(Scenario::A, loci).unwrap());
        // deme 1: one allele, no diversity, no variance; deme 2: two alleles,
        // diversity 2/1 * (1 - 1/2) = 1, variance 2; (0 - 2)^2 = 4.
        assert_eq!(s, vec![1.0, 0.0, 0.0, 2.0, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn names_round_trip() {
        for s in ["mean", "gk-octiles", "arch-ls", "arch-logacf", "garch-mle", "popgen"] {
            assert_eq!(s.parse::<SummaryStat>().unwrap().name(), s);
        }
        assert!("median".parse::<SummaryStat>().is_err());
    }
}
