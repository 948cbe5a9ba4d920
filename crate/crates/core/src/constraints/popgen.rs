//! Pairwise composite likelihood for microsatellite loci under the stepwise
//! mutation model, and the per-locus composite score used as EL constraints.
//!
//! Two genes from the same deme differ by `delta` with probability
//! `rho^{|delta|} / sqrt(1 + 2 theta)`. Genes from demes that split at `tau`
//! differ by
//! `e^{-tau theta} / sqrt(1 + 2 theta) * sum_k rho^{|k|} I_{|delta| - k}(tau theta)`.

use std::collections::BTreeMap;

use super::data::{Microsat, Scenario};
use super::{check_len, ConstraintProvider, Dataset};
use crate::el::ConstraintMatrix;
use crate::error::{domain, input, Result};
use crate::mathfn::bessel_i_scaled_seq;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopGenParams {
    A { theta: f64, tau: f64 },
    B { theta: f64, tau1: f64, tau2: f64 },
}

impl PopGenParams {
    pub fn from_slice(scenario: Scenario, v: &[f64]) -> Result<Self> {
        check_len(v, scenario.n_params())?;
        let p = match scenario {
            Scenario::A => PopGenParams::A { theta: v[0], tau: v[1] },
            Scenario::B => PopGenParams::B { theta: v[0], tau1: v[1], tau2: v[2] },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            PopGenParams::A { .. } => Scenario::A,
            PopGenParams::B { .. } => Scenario::B,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            PopGenParams::A { theta, .. } | PopGenParams::B { theta, .. } => theta,
        }
    }

    /// Divergence times, most recent first.
    pub fn taus(&self) -> Vec<f64> {
        match *self {
            PopGenParams::A { tau, .. } => vec![tau],
            PopGenParams::B { tau1, tau2, .. } => vec![tau1, tau2],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.theta()];
        v.extend(self.taus());
        v
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.theta();
        if !(theta > 0.0 && theta.is_finite()) {
            return domain(format!("theta must be > 0, got {theta}"));
        }
        let taus = self.taus();
        if taus.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return domain(format!("divergence times must be >= 0, got {taus:?}"));
        }
        if taus.windows(2).any(|w| w[0] > w[1]) {
            return domain(format!("divergence times must satisfy tau1 <= tau2, got {taus:?}"));
        }
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("theta must be > 0, got {theta}"));
    }
    Ok(())
}

/// `rho(theta) = theta / (1 + theta + sqrt(1 + 2 theta))`, in `(0, 1)`.
pub fn rho(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(rho_unchecked(theta))
}

fn rho_unchecked(theta: f64) -> f64 {
    theta / (1.0 + theta + (1.0 + 2.0 * theta).sqrt())
}

/// `d rho / d theta = 2 / (s (s + 1)^2)` with `s = sqrt(1 + 2 theta)`.
fn drho(theta: f64) -> f64 {
    let s = (1.0 + 2.0 * theta).sqrt();
    2.0 / (s * (s + 1.0) * (s + 1.0))
}

/// Log-probability that two genes from one deme differ by `delta` repeats.
pub fn pair_loglik_same_deme(delta: i64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(same_deme(delta.unsigned_abs(), theta).0)
}

/// `(log l, d/d theta)`.
fn same_deme(m: u64, theta: f64) -> (f64, f64) {
    let r = rho_unchecked(theta);
    let s2 = 1.0 + 2.0 * theta;
    let mf = m as f64;
    let ll = if m == 0 { -0.5 * s2.ln() } else { mf * r.ln() - 0.5 * s2.ln() };
    // rho' / rho = 1 / (s theta)
    (ll, mf / (s2.sqrt() * theta) - 1.0 / s2)
}

/// Log-probability that genes from demes split at `tau` differ by `delta` repeats.
pub fn pair_loglik_diverged(delta: i64, theta: f64, tau: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return domain(format!("tau must be >= 0, got {tau}"));
    }
    let m = delta.unsigned_abs();
    if tau == 0.0 {
        return Ok(same_deme(m, theta).0);
    }
    Ok(DivergedKernel::new(theta, tau, m as usize)?.eval(m as usize).0)
}

/// Bessel-sum truncation `|k| <= K`. Beyond the `|delta|`- and
/// `sqrt(tau theta)`-driven terms, `K` is large enough that `rho^K < 1e-16`.
pub fn truncation(m: usize, theta: f64, tau: f64) -> usize {
    let r = rho_unchecked(theta);
    let geometric = (37.0 / -r.ln()).ceil() as usize;
    let bessel = m + (10.0 * (tau * theta + 1.0).sqrt()).ceil() as usize + 40;
    60.max(bessel).max(geometric)
}

/// Precomputed Bessel values and powers of `rho` for one `(theta, tau)`,
/// valid for every `|delta| <= max_m`.
struct DivergedKernel {
    theta: f64,
    tau: f64,
    k: usize,
    rho_pow: Vec<f64>,
    drho: f64,
    bessel: Vec<f64>,
}

impl DivergedKernel {
    fn new(theta: f64, tau: f64, max_m: usize) -> Result<Self> {
        let k = truncation(max_m, theta, tau);
        let r = rho_unchecked(theta);
        let mut rho_pow = Vec::with_capacity(k + 1);
        let mut acc = 1.0;
        for _ in 0..=k {
            rho_pow.push(acc);
            acc *= r;
        }
        let bessel = bessel_i_scaled_seq(max_m + k + 1, tau * theta)?;
        Ok(Self { theta, tau, k, rho_pow, drho: drho(theta), bessel })
    }

    /// `(log l, d/d theta, d/d tau)` at `|delta| = m`.
    fn eval(&self, m: usize) -> (f64, f64, f64) {
        let b = &self.bessel;
        let (mut g, mut gz, mut gr) = (0.0, 0.0, 0.0);
        let k = self.k as i64;
        for kk in -k..=k {
            let j = (m as i64 - kk).unsigned_abs() as usize;
            let ak = kk.unsigned_abs() as usize;
            let w = self.rho_pow[ak];
            let ij = b[j];
            // d/dz of e^{-z} I_j(z)
            let below = if j == 0 { b[1] } else { b[j - 1] };
            let dij = 0.5 * (below + b[j + 1]) - ij;
            g += w * ij;
            gz += w * dij;
            if ak > 0 {
                gr += ak as f64 * self.rho_pow[ak - 1] * ij;
            }
        }
        let s2 = 1.0 + 2.0 * self.theta;
        let ll = g.ln() - 0.5 * s2.ln();
        let d_theta = (gr * self.drho + self.tau * gz) / g - 1.0 / s2;
        let d_tau = self.theta * gz / g;
        (ll, d_theta, d_tau)
    }
}

/// How a pair of genes relates under the scenario tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum PairClass {
    Same,
    /// Split at the `i`-th divergence time (0 = most recent).
    Diverged(usize),
}

fn classify(scenario: Scenario, d1: u8, d2: u8) -> PairClass {
    if d1 == d2 {
        return PairClass::Same;
    }
    match scenario {
        Scenario::A => PairClass::Diverged(0),
        Scenario::B => {
            if d1 != 1 && d2 != 1 {
                PairClass::Diverged(0)
            } else {
                PairClass::Diverged(1)
            }
        }
    }
}

/// Per-locus counts of pairs by `(class, |delta|)`.
type PairHistogram = BTreeMap<(PairClass, usize), f64>;

fn pair_histograms(data: &Microsat) -> Vec<PairHistogram> {
    let nd = data.scenario.n_demes() as usize;
    data.loci
        .iter()
        .map(|locus| {
            let mut counts: Vec<BTreeMap<i32, f64>> = vec![BTreeMap::new(); nd];
            for (a, d) in locus.alleles.iter().zip(&locus.demes) {
                *counts[*d as usize - 1].entry(*a).or_insert(0.0) += 1.0;
            }
            let mut hist = PairHistogram::new();
            for d1 in 0..nd {
                for d2 in d1..nd {
                    let class = classify(data.scenario, d1 as u8 + 1, d2 as u8 + 1);
                    for (&a, &ca) in &counts[d1] {
                        for (&b, &cb) in &counts[d2] {
                            // Within a deme each unordered pair is counted once.
                            let pairs = if d1 != d2 || a < b {
                                ca * cb
                            } else if a == b {
                                ca * (ca - 1.0) / 2.0
                            } else {
                                continue;
                            };
                            if pairs > 0.0 {
                                *hist.entry((class, (a - b).unsigned_abs() as usize)).or_insert(0.0) += pairs;
                            }
                        }
                    }
                }
            }
            hist
        })
        .collect()
}

/// One row per locus: the gradient of the locus' summed pairwise log-likelihood
/// in `(theta, tau...)`. With `theta_same_pop_only` the `theta` component only
/// sums over pairs of genes from the same deme.
pub fn composite_score_matrix(data: &Microsat, phi: &PopGenParams, theta_same_pop_only: bool) -> Result<ConstraintMatrix> {
    phi.validate()?;
    if phi.scenario() != data.scenario {
        return input(format!("parameters for scenario {} but data from scenario {}", phi.scenario(), data.scenario));
    }
    let hists = pair_histograms(data);
    let theta = phi.theta();
    let taus = phi.taus();
    let dim = 1 + taus.len();

    let mut max_m = vec![0usize; taus.len()];
    for h in &hists {
        for &(class, m) in h.keys() {
            if let PairClass::Diverged(i) = class {
                max_m[i] = max_m[i].max(m);
            }
        }
    }
    let kernels: Vec<Option<DivergedKernel>> = taus
        .iter()
        .zip(&max_m)
        .map(|(&tau, &mm)| if tau > 0.0 { DivergedKernel::new(theta, tau, mm).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;

    let mut data_out = Vec::with_capacity(hists.len() * dim);
    for h in &hists {
        let mut row = vec![0.0; dim];
        for (&(class, m), &count) in h {
            match class {
                PairClass::Same => {
                    row[0] += count * same_deme(m as u64, theta).1;
                }
                PairClass::Diverged(i) => {
                    let (_, dt, dtau) = match &kernels[i] {
                        Some(k) => k.eval(m),
                        None => DivergedKernel::new(theta, 0.0, m)?.eval(m),
                    };
                    if !theta_same_pop_only {
                        row[0] += count * dt;
                    }
                    row[1 + i] += count * dtau;
                }
            }
        }
        data_out.extend(row);
    }
    ConstraintMatrix::new(hists.len(), dim, data_out)
}

/// Composite score constraints; `theta = (theta, tau)` for scenario A and
/// `(theta, tau1, tau2)` for scenario B.
#[derive(Debug, Clone, Copy)]
pub struct CompositeScore {
    pub scenario: Scenario,
    pub theta_same_pop_only: bool,
}

impl CompositeScore {
    /// Scenario A restricts the `theta` score to same-deme pairs; scenario B uses all pairs.
    pub fn with_defaults(scenario: Scenario) -> Self {
        Self { scenario, theta_same_pop_only: scenario == Scenario::A }
    }
}

impl ConstraintProvider for CompositeScore {
    fn n_params(&self) -> usize {
        self.scenario.n_params()
    }

    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix> {
        let phi = PopGenParams::from_slice(self.scenario, theta)?;
        composite_score_matrix(data.as_microsat()?, &phi, self.theta_same_pop_only)
    }
}

#[cfg(test)]
mod tests {
    use super::super::data::Locus;
    use super::*;
    use crate::mathfn::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn rho_values() {
        assert!((rho(4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(rho(1e-12).unwrap() < 1e-11);
        assert!(rho(0.0).is_err() && rho(-1.0).is_err());
        for t in [0.1, 1.0, 10.0] {
            let r = rho(t).unwrap();
            assert!(((1.0 + r) / (1.0 - r) - (1.0 + 2.0 * t).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn drho_matches_difference_quotient() {
        for t in [0.05, 0.7, 3.0, 30.0] {
            let h = 1e-6 * t;
            let fd = (rho_unchecked(t + h) - rho_unchecked(t - h)) / (2.0 * h);
            assert!((drho(t) - fd).abs() < 1e-8 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn same_deme_values() {
        assert!((pair_loglik_same_deme(0, 4.0).unwrap() + 3f64.ln()).abs() < 1e-15);
        assert!(pair_loglik_same_deme(0, 0.0).is_err());
        let mut prev = pair_loglik_same_deme(0, 1.0).unwrap();
        for d in 1..100 {
            let v = pair_loglik_same_deme(d, 1.0).unwrap();
            assert!(v < prev);
            assert_eq!(v, pair_loglik_same_deme(-d, 1.0).unwrap());
            prev = v;
        }
    }

    fn total_same(theta: f64, d: i64) -> f64 {
        (-d..=d).map(|x| pair_loglik_same_deme(x, theta).unwrap().exp()).sum()
    }

    fn total_div(theta: f64, tau: f64, d: i64) -> f64 {
        (-d..=d).map(|x| pair_loglik_diverged(x, theta, tau).unwrap().exp()).sum()
    }

    #[test]
    fn normalization() {
        assert!((total_same(1.0, 200) - 1.0).abs() < 1e-10);
        assert!((total_div(1.0, 0.5, 300) - 1.0).abs() < 1e-8);
        for theta in [0.5, 1.0, 5.0] {
            assert!((total_same(theta, 300) - 1.0).abs() < 1e-8);
            for tau in [0.0, 0.5, 2.0] {
                assert!((total_div(theta, tau, 300) - 1.0).abs() < 1e-8, "theta={theta} tau={tau}");
            }
        }
        // the prior box reaches theta ~ 31.6 and tau = 10
        assert!((total_div(31.6, 10.0, 2000) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_divergence_reduces_to_same_deme() {
        for d in [-7, 0, 3, 25] {
            for theta in [0.1, 2.0, 9.0] {
                let a = pair_loglik_diverged(d, theta, 0.0).unwrap();
                let b = pair_loglik_same_deme(d, theta).unwrap();
                assert!((a - b).abs() <= 1e-12);
                // and the Bessel path agrees in the limit
                let c = pair_loglik_diverged(d, theta, 1e-13).unwrap();
                assert!((c - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn diverged_is_symmetric_and_nonincreasing() {
        for theta in [0.5, 1.0, 5.0] {
            for tau in [0.0, 0.5, 2.0] {
                let mut prev = f64::INFINITY;
                for d in 0..=50 {
                    let v = pair_loglik_diverged(d, theta, tau).unwrap();
                    assert_eq!(v, pair_loglik_diverged(-d, theta, tau).unwrap());
                    assert!(v <= prev + 1e-14, "theta={theta} tau={tau} d={d}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn diverged_matches_skellam_convolution() {
        // Independent route: the divergence term is a Skellam(z/2, z/2)
        // difference convolved with the same-deme geometric law.
        let (theta, tau) = (1.3, 0.8);
        let z: f64 = theta * tau;
        let skellam = |j: i64| -> f64 {
            // e^{-z} sum_n (z/2)^{2n+|j|} / (n! (n+|j|)!)
            let a = j.unsigned_abs() as i32;
            let mut s = 0.0;
            for n in 0..80 {
                let mut t = (z / 2.0).powi(2 * n + a);
                for i in 1..=n {
                    t /= i as f64;
                }
                for i in 1..=(n + a) {
                    t /= i as f64;
                }
                s += t;
            }
            (-z).exp() * s
        };
        for d in 0..8i64 {
            let conv: f64 = (-80..=80).map(|k| skellam(d - k) * pair_loglik_same_deme(k, theta).unwrap().exp()).sum();
            let got = pair_loglik_diverged(d, theta, tau).unwrap().exp();
            assert!((got - conv).abs() < 1e-13, "d={d}");
        }
    }

    fn random_panel(seed: u64, scenario: Scenario, loci: usize, per_deme: usize) -> Microsat {
        let mut rng = RngStream::new(seed, 0).rng();
        let nd = scenario.n_demes();
        let loci = (0..loci)
            .map(|_| {
                let mut alleles = Vec::new();
                let mut demes = Vec::new();
                for d in 1..=nd {
                    for _ in 0..per_deme {
                        alleles.push(rng.random_range(-4..=4) + d as i32);
                        demes.push(d);
                    }
                }
                Locus { alleles, demes }
            })
            .collect();
        Microsat::new(scenario, loci).unwrap()
    }

    /// Summed pairwise log-likelihood over all gene pairs, by brute force.
    fn brute_loglik(locus: &Locus, scenario: Scenario, v: &[f64], same_only: bool) -> f64 {
        let mut s = 0.0;
        let n = locus.alleles.len();
        for i in 0..n {
            for j in i + 1..n {
                let d = (locus.alleles[i] - locus.alleles[j]) as i64;
                match classify(scenario, locus.demes[i], locus.demes[j]) {
                    PairClass::Same => s += pair_loglik_same_deme(d, v[0]).unwrap(),
                    PairClass::Diverged(k) if !same_only => s += pair_loglik_diverged(d, v[0], v[1 + k]).unwrap(),
                    PairClass::Diverged(_) => {}
                }
            }
        }
        s
    }

    fn check_scores(seed: u64, scenario: Scenario, v: &[f64]) {
        let panel = random_panel(seed, scenario, 3, 4);
        let phi = PopGenParams::from_slice(scenario, v).unwrap();
        let full = composite_score_matrix(&panel, &phi, false).unwrap();
        let restricted = composite_score_matrix(&panel, &phi, true).unwrap();
        let step = 1e-6;
        for (k, locus) in panel.loci.iter().enumerate() {
            for j in 0..v.len() {
                let mut up = v.to_vec();
                let mut dn = v.to_vec();
                up[j] += step;
                dn[j] -= step;
                let fd = (brute_loglik(locus, scenario, &up, false) - brute_loglik(locus, scenario, &dn, false)) / (2.0 * step);
                let an = full.get(k, j);
                assert!((an - fd).abs() <= 1e-4 * fd.abs() + 1e-6, "full k={k} j={j} an={an} fd={fd} v={v:?}");
            }
            let fd = (brute_loglik(locus, scenario, &[v[0] + step], true) - brute_loglik(locus, scenario, &[v[0] - step], true))
                / (2.0 * step);
            let an = restricted.get(k, 0);
            assert!((an - fd).abs() <= 1e-4 * fd.abs() + 1e-6, "restricted an={an} fd={fd}");
            for j in 1..v.len() {
                assert_eq!(restricted.get(k, j), full.get(k, j));
            }
        }
    }

    #[test]
    fn scores_match_finite_differences() {
        check_scores(1, Scenario::A, &[2.0, 0.7]);
        check_scores(2, Scenario::B, &[1.5, 0.3, 1.9]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn scores_fd_random(seed in 0u64..10_000, lt in -0.9f64..1.4, l1 in -0.9f64..0.9, l2 in -0.9f64..0.9, b in proptest::bool::ANY) {
            if b {
                check_scores(seed, Scenario::A, &[10f64.powf(lt), 10f64.powf(l1)]);
            } else {
                let (t1, t2) = (10f64.powf(l1.min(l2)), 10f64.powf(l1.max(l2)));
                check_scores(seed, Scenario::B, &[10f64.powf(lt), t1, t2]);
            }
        }
    }

    #[test]
    fn single_deme_pair_has_no_tau_score() {
        // two loci so the 2-column matrix is well formed
        let locus = Locus { alleles: vec![3, 3], demes: vec![1, 1] };
        let panel = Microsat::new(Scenario::A, vec![locus.clone(), locus]).unwrap();
        for flag in [false, true] {
            let h = composite_score_matrix(&panel, &PopGenParams::A { theta: 1.0, tau: 0.5 }, flag).unwrap();
            assert_eq!(h.get(0, 1), 0.0);
        }
    }

    #[test]
    fn support_and_scenario_checks() {
        let panel = random_panel(3, Scenario::A, 2, 3);
        assert!(composite_score_matrix(&panel, &PopGenParams::B { theta: 1.0, tau1: 0.1, tau2: 0.2 }, false).is_err());
        assert!(composite_score_matrix(&panel, &PopGenParams::A { theta: 0.0, tau: 0.1 }, false).is_err());
        assert!(PopGenParams::from_slice(Scenario::B, &[1.0, 0.5, 0.2]).is_err());
        assert!(PopGenParams::from_slice(Scenario::A, &[1.0, -0.1]).is_err());
    }
}
