use std::fmt::Write as _;

use crate::error::{input, Error, Result};
use crate::mathfn::{log_sum_exp, weighted_quantile};

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    /// Natural-scale parameter.
    pub theta: Vec<f64>,
    /// Unnormalized, nonnegative.
    pub weight: f64,
    /// 1-based sampler iteration that produced the particle.
    pub iteration: usize,
}

/// How many EL evaluations fell outside the solver's happy path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ElTally {
    pub hull_violations: usize,
    pub domain_errors: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub dim: usize,
    pub particles: Vec<Particle>,
    pub tally: ElTally,
}

impl WeightedSample {
    /// Build from log weights, shifting by the maximum before exponentiating.
    pub fn from_log_weights(dim: usize, draws: Vec<(Vec<f64>, f64, usize)>, tally: ElTally) -> Result<Self> {
        let max = draws.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::AllWeightsZero(draws.len()));
        }
        let particles = draws
            .into_iter()
            .map(|(theta, lw, iteration)| Particle { theta, weight: (lw - max).exp(), iteration })
            .collect();
        Ok(Self { dim, particles, tally })
    }

    /// Equal weights.
    pub fn unweighted(dim: usize, thetas: Vec<Vec<f64>>) -> Self {
        let particles = thetas.into_iter().map(|theta| Particle { theta, weight: 1.0, iteration: 1 }).collect();
        Self { dim, particles, tally: ElTally::default() }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p.theta[j]).collect()
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.weights())
    }

    /// `iter,weight,theta_1..theta_d`, one particle per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,weight");
        for j in 1..=self.dim {
            let _ = write!(s, ",theta_{j}");
        }
        s.push('\n');
        for p in &self.particles {
            let _ = write!(s, "{},{}", p.iteration, p.weight);
            for t in &p.theta {
                let _ = write!(s, ",{t}");
            }
            s.push('\n');
        }
        s
    }
}

/// Effective sample size `1 / sum (w_i / sum w)^2`, in `[1, M]`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return input("weights must be finite and nonnegative");
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllWeightsZero(weights.len()));
    }
    let sq: f64 = weights.iter().map(|w| (w / total).powi(2)).sum();
    // Only rounding can push the ratio outside its mathematical range.
    Ok((1.0 / sq).clamp(1.0, weights.len() as f64))
}

/// ESS from log weights without leaving log space.
pub fn ess_from_log(log_w: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return Err(Error::AllWeightsZero(log_w.len()));
    }
    let lse2 = log_sum_exp(&log_w.iter().map(|l| 2.0 * l).collect::<Vec<_>>());
    Ok((2.0 * lse - lse2).exp().clamp(1.0, log_w.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CoordinateSummary {
    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub coords: Vec<CoordinateSummary>,
    pub ess: f64,
    pub cred: f64,
}

impl PosteriorSummary {
    pub fn means(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.mean).collect()
    }

    /// `param,mean,sd,median,lower,upper,ess` with generic `theta_j` names
    /// unless `names` supplies them.
    pub fn to_csv(&self, names: Option<&[String]>) -> String {
        let mut s = String::from("param,mean,sd,median,lower,upper,ess\n");
        for (j, c) in self.coords.iter().enumerate() {
            let name = names.and_then(|n| n.get(j).cloned()).unwrap_or_else(|| format!("theta_{}", j + 1));
            let _ = writeln!(s, "{name},{},{},{},{},{},{}", c.mean, c.sd, c.median, c.lower, c.upper, self.ess);
        }
        s
    }
}

/// Weighted mean and sd, median, and the equal-tailed `cred` interval of every coordinate.
pub fn posterior_summary(s: &WeightedSample, cred: f64) -> Result<PosteriorSummary> {
    if !(cred > 0.0 && cred < 1.0) {
        return input(format!("credible mass must lie in (0, 1), got {cred}"));
    }
    let w = s.weights();
    let ess = ess(&w)?;
    let total: f64 = w.iter().sum();
    let tail = (1.0 - cred) / 2.0;
    let coords = (0..s.dim)
        .map(|j| {
            let x = s.coordinate(j);
            let mean = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
            let var = x.iter().zip(&w).map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>() / total;
            Ok(CoordinateSummary {
                mean,
                sd: var.sqrt(),
                median: weighted_quantile(&x, &w, 0.5)?,
                lower: weighted_quantile(&x, &w, tail)?,
                upper: weighted_quantile(&x, &w, 1.0 - tail)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSummary { coords, ess, cred })
}
