use rayon::prelude::*;

use super::prior::PriorSpec;
use super::sample::{ElTally, WeightedSample};
use crate::constraints::{ConstraintProvider, Dataset};
use crate::el::{el_log_likelihood, ElEvaluation, ElFlag, SolverConfig};
use crate::error::{input, Error, Result};
use crate::mathfn::{log_sum_exp, student_t3_logpdf, student_t3_sample, weighted_mean_cov, RngStream, SpdMatrix};

/// A model's estimating equations bound to observed data.
#[derive(Clone, Copy)]
pub struct ElTarget<'a> {
    pub provider: &'a dyn ConstraintProvider,
    pub data: &'a Dataset,
    pub solver: SolverConfig,
}

impl<'a> ElTarget<'a> {
    pub fn new(provider: &'a dyn ConstraintProvider, data: &'a Dataset) -> Self {
        Self { provider, data, solver: SolverConfig::default() }
    }

    pub fn evaluate(&self, theta: &[f64]) -> ElEvaluation {
        el_log_likelihood(self.data, theta, self.provider, &self.solver)
    }

    fn check_prior(&self, prior: &PriorSpec) -> Result<()> {
        if prior.dim() != self.provider.n_params() {
            return input(format!("prior has dimension {}, model expects {}", prior.dim(), self.provider.n_params()));
        }
        Ok(())
    }
}

fn tally(evals: &[&ElEvaluation]) -> ElTally {
    let mut t = ElTally::default();
    for e in evals {
        match e.flag {
            ElFlag::Converged => {}
            ElFlag::HullViolation => t.hull_violations += 1,
            ElFlag::Domain(_) => t.domain_errors += 1,
            ElFlag::MaxIterations => t.max_iterations += 1,
        }
    }
    t
}

/// Importance sampling from the prior with EL weights.
///
/// Particle `i` draws from `stream.substream(i)`, so the sample does not depend
/// on how the work is scheduled.
pub fn bcel_basic(stream: &RngStream, prior: &PriorSpec, target: &ElTarget, m: usize) -> Result<WeightedSample> {
    if m == 0 {
        return input("need at least one particle");
    }
    target.check_prior(prior)?;
    let draws: Vec<(Vec<f64>, ElEvaluation)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let theta = prior.sample(&mut stream.substream(i as u64).rng());
            let ev = target.evaluate(&theta);
            (theta, ev)
        })
        .collect();
    let t = tally(&draws.iter().map(|d| &d.1).collect::<Vec<_>>());
    let weighted = draws.into_iter().map(|(theta, ev)| (theta, ev.log_el, 1)).collect();
    WeightedSample::from_log_weights(prior.dim(), weighted, t)
}

/// Denominator used to re-weight AMIS particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mixture {
    /// Equal-weight mixture of every proposal issued so far, including the
    /// current one, and each particle's own prior density in the numerator.
    #[default]
    Full,
    /// Only the proposals `1..t-1` in the denominator, and the numerator prior
    /// evaluated at the iteration-`t` particle of the same index. Kept for
    /// comparison; it can be unstable because a particle's own proposal is
    /// missing from its denominator.
    PastOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmisConfig {
    /// Particles per iteration.
    pub m: usize,
    /// Iterations; 1 is plain prior sampling.
    pub iterations: usize,
    pub mixture: Mixture,
}

struct AmisParticle {
    working: Vec<f64>,
    theta: Vec<f64>,
    log_prior: f64,
    log_el: f64,
    /// `log q_s` at this particle for every proposal issued so far.
    log_q: Vec<f64>,
    iteration: usize,
}

/// Adaptive multiple importance sampling with Student-t3 proposals refitted
/// to all past weighted particles.
///
/// Iteration `t`, particle `i` draws from `stream.substream((t - 1) M + i)`;
/// the first iteration is therefore identical to [`bcel_basic`].
pub fn bcel_amis(stream: &RngStream, prior: &PriorSpec, target: &ElTarget, cfg: &AmisConfig) -> Result<WeightedSample> {
    let m = cfg.m;
    if m == 0 || cfg.iterations == 0 {
        return input("AMIS needs at least one particle and one iteration");
    }
    target.check_prior(prior)?;
    let mut evals: Vec<ElEvaluation> = Vec::new();

    let first: Vec<(AmisParticle, ElEvaluation)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let working = prior.sample_working(&mut stream.substream(i as u64).rng());
            let theta = prior.to_natural(&working);
            let log_prior = prior.log_density_working(&working);
            let ev = target.evaluate(&theta);
            let p = AmisParticle { working, theta, log_prior, log_el: ev.log_el, log_q: vec![log_prior], iteration: 1 };
            (p, ev)
        })
        .collect();
    let mut particles: Vec<AmisParticle> = Vec::with_capacity(m * cfg.iterations);
    for (p, ev) in first {
        particles.push(p);
        evals.push(ev);
    }
    // Step one weights are the EL alone: the prior cancels against q_1.
    let mut log_w: Vec<f64> = particles.iter().map(|p| p.log_el).collect();

    let mut proposals: Vec<(Vec<f64>, SpdMatrix)> = Vec::new();
    for t in 2..=cfg.iterations {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::AllWeightsZero(log_w.len()));
        }
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let points: Vec<&[f64]> = particles.iter().map(|p| p.working.as_slice()).collect();
        let (mean, cov) = weighted_mean_cov(&points, &w)?;

        let offset = ((t - 1) * m) as u64;
        let fresh: Vec<(AmisParticle, Option<ElEvaluation>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.substream(offset + i as u64).rng();
                let working = student_t3_sample(&mut rng, &mean, &cov)?;
                let theta = prior.to_natural(&working);
                let log_prior = prior.log_density_working(&working);
                // Off the prior support the weight is zero whatever the EL says.
                let ev = log_prior.is_finite().then(|| target.evaluate(&theta));
                let log_el = ev.as_ref().map_or(f64::NEG_INFINITY, |e| e.log_el);
                let mut log_q = vec![log_prior];
                for (pm, pc) in &proposals {
                    log_q.push(student_t3_logpdf(&working, pm, pc)?);
                }
                Ok((AmisParticle { working, theta, log_prior, log_el, log_q, iteration: t }, ev))
            })
            .collect::<Result<Vec<_>>>()?;
        for (p, ev) in fresh {
            particles.push(p);
            evals.extend(ev);
        }
        particles.par_iter_mut().try_for_each(|p| -> Result<()> {
            p.log_q.push(student_t3_logpdf(&p.working, &mean, &cov)?);
            Ok(())
        })?;
        proposals.push((mean, cov));

        log_w = reweight(&particles, t, m, cfg.mixture);
    }

    let t = tally(&evals.iter().collect::<Vec<_>>());
    let draws = particles.into_iter().zip(log_w).map(|(p, lw)| (p.theta, lw, p.iteration)).collect();
    WeightedSample::from_log_weights(prior.dim(), draws, t)
}

fn reweight(particles: &[AmisParticle], t: usize, m: usize, mixture: Mixture) -> Vec<f64> {
    match mixture {
        Mixture::Full => {
            let ln_t = (t as f64).ln();
            particles
                .par_iter()
                .map(|p| {
                    if !(p.log_prior.is_finite() && p.log_el.is_finite()) {
                        return f64::NEG_INFINITY;
                    }
                    p.log_prior + p.log_el - (log_sum_exp(&p.log_q[..t]) - ln_t)
                })
                .collect()
        }
        Mixture::PastOnly => {
            let newest = &particles[(t - 1) * m..t * m];
            particles
                .par_iter()
                .enumerate()
                .map(|(idx, p)| {
                    let numer = newest[idx % m].log_prior + p.log_el;
                    if !numer.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    numer - log_sum_exp(&p.log_q[..t - 1])
                })
                .collect()
        }
    }
}
