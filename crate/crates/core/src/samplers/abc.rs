use rayon::prelude::*;

use super::prior::PriorSpec;
use super::sample::{ElTally, WeightedSample};
use super::summaries::SummaryStat;
use crate::constraints::Dataset;
use crate::error::{input, Error, Result};
use crate::mathfn::RngStream;
use crate::simulate::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Euclidean,
    /// Euclidean after dividing each summary by its standard deviation across
    /// the simulated reference table.
    MahalanobisDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Keep the `q` fraction of `M / q` simulations closest to the data.
    Quantile(f64),
    /// Accept any simulation within `eps`, giving up after `max_sims`.
    Epsilon { eps: f64, max_sims: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcConfig {
    pub summary: SummaryStat,
    pub distance: Distance,
    pub tolerance: Tolerance,
    /// Accepted sample size.
    pub m: usize,
}

impl AbcConfig {
    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return input("ABC needs a positive sample size");
        }
        match self.tolerance {
            Tolerance::Quantile(q) if !(q > 0.0 && q <= 1.0) => input(format!("ABC quantile must lie in (0, 1], got {q}")),
            Tolerance::Epsilon { eps, .. } if eps.is_nan() || eps < 0.0 => input(format!("ABC tolerance must be >= 0, got {eps}")),
            _ => Ok(()),
        }
    }
}

struct Draw {
    theta: Vec<f64>,
    stats: Option<Vec<f64>>,
}

fn draw(stream: &RngStream, i: u64, prior: &PriorSpec, sim: &dyn Simulator, summary: SummaryStat) -> Draw {
    let s = stream.substream(i);
    let theta = prior.sample(&mut s.rng());
    let stats = sim.simulate(&s.substream(0), &theta).and_then(|d| summary.compute(&d)).ok();
    Draw { theta, stats }
}

fn scales(draws: &[Draw], dim: usize, distance: Distance) -> Vec<f64> {
    if distance == Distance::Euclidean {
        return vec![1.0; dim];
    }
    let ok: Vec<&Vec<f64>> = draws.iter().filter_map(|d| d.stats.as_ref()).collect();
    (0..dim)
        .map(|j| {
            let n = ok.len() as f64;
            let m = ok.iter().map(|s| s[j]).sum::<f64>() / n;
            let sd = (ok.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

fn distance(stats: Option<&Vec<f64>>, observed: &[f64], scale: &[f64]) -> f64 {
    match stats {
        Some(s) if s.len() == observed.len() => {
            let d2: f64 = s.iter().zip(observed).zip(scale).map(|((a, b), c)| ((a - b) / c).powi(2)).sum();
            if d2.is_nan() {
                f64::INFINITY
            } else {
                d2.sqrt()
            }
        }
        _ => f64::INFINITY,
    }
}

/// Rejection ABC with unit weights.
///
/// Simulation `i` uses `stream.substream(i)` for the prior draw and its child
/// stream 0 for the dataset. Failed simulations or summaries never pass and are
/// counted in the returned tally's `domain_errors`.
pub fn abc_rejection(
    stream: &RngStream,
    prior: &PriorSpec,
    sim: &dyn Simulator,
    cfg: &AbcConfig,
    data: &Dataset,
) -> Result<WeightedSample> {
    cfg.validate()?;
    if prior.dim() != sim.n_params() {
        return input(format!("prior has dimension {}, simulator expects {}", prior.dim(), sim.n_params()));
    }
    let observed = cfg.summary.compute(data)?;
    match cfg.tolerance {
        Tolerance::Quantile(q) => {
            let n = (cfg.m as f64 / q).ceil() as usize;
            let draws: Vec<Draw> = (0..n as u64).into_par_iter().map(|i| draw(stream, i, prior, sim, cfg.summary)).collect();
            let scale = scales(&draws, observed.len(), cfg.distance);
            let dist: Vec<f64> = draws.iter().map(|d| distance(d.stats.as_ref(), &observed, &scale)).collect();
            let failed = draws.iter().filter(|d| d.stats.is_none()).count();
            let mut order: Vec<usize> = (0..n).filter(|i| dist[*i].is_finite()).collect();
            if order.is_empty() {
                return Err(Error::AllWeightsZero(n));
            }
            order.sort_by(|a, b| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b)));
            order.truncate(cfg.m);
            order.sort_unstable();
            let mut out = WeightedSample::unweighted(prior.dim(), order.into_iter().map(|i| draws[i].theta.clone()).collect());
            out.tally = ElTally { domain_errors: failed, ..Default::default() };
            Ok(out)
        }
        Tolerance::Epsilon { eps, max_sims } => {
            let mut accepted = Vec::with_capacity(cfg.m);
            let mut failed = 0;
            let mut scale: Option<Vec<f64>> = None;
            let mut next = 0u64;
            while accepted.len() < cfg.m {
                if next as usize >= max_sims {
                    return Err(Error::IterationCap(max_sims));
                }
                let batch = (cfg.m as u64).min(max_sims as u64 - next);
                let draws: Vec<Draw> =
                    (next..next + batch).into_par_iter().map(|i| draw(stream, i, prior, sim, cfg.summary)).collect();
                next += batch;
                // The first batch doubles as the pilot for the summary scales.
                let sc = scale.get_or_insert_with(|| scales(&draws, observed.len(), cfg.distance));
                for d in draws {
                    failed += d.stats.is_none() as usize;
                    if accepted.len() < cfg.m && distance(d.stats.as_ref(), &observed, sc) <= eps {
                        accepted.push(d.theta);
                    }
                }
            }
            let mut out = WeightedSample::unweighted(prior.dim(), accepted);
            out.tally = ElTally { domain_errors: failed, ..Default::default() };
            Ok(out)
        }
    }
}
