use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{input, Result};

/// Map between sampling coordinates and model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// The box is on `log10(theta)`.
    Log10,
}

/// One independent component of a prior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorBlock {
    /// Uniform on `prod [lo_j, hi_j]` in transformed coordinates.
    UniformBox { lo: Vec<f64>, hi: Vec<f64>, transform: Transform },
    Exponential { rate: f64 },
    /// Dirichlet on the `d`-simplex, represented by its first `d - 1` coordinates.
    Dirichlet { alpha: Vec<f64> },
}

impl PriorBlock {
    pub fn dim(&self) -> usize {
        match self {
            PriorBlock::UniformBox { lo, .. } => lo.len(),
            PriorBlock::Exponential { .. } => 1,
            PriorBlock::Dirichlet { alpha } => alpha.len() - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PriorBlock::UniformBox { lo, hi, .. } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return input(format!("uniform box bounds have lengths {} and {}", lo.len(), hi.len()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
                    return input(format!("uniform box needs finite lo < hi, got {lo:?} {hi:?}"));
                }
            }
            PriorBlock::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return input(format!("exponential rate must be positive, got {rate}"));
                }
            }
            PriorBlock::Dirichlet { alpha } => {
                if alpha.len() < 2 || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return input(format!("Dirichlet needs >= 2 positive concentrations, got {alpha:?}"));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            PriorBlock::UniformBox { lo, hi, .. } => {
                out.extend(lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()));
            }
            PriorBlock::Exponential { rate } => out.push(Exp::new(*rate).expect("validated").sample(rng)),
            PriorBlock::Dirichlet { alpha } => {
                let g: Vec<f64> = alpha.iter().map(|a| Gamma::new(*a, 1.0).expect("validated").sample(rng)).collect();
                let s: f64 = g.iter().sum();
                out.extend(g[..g.len() - 1].iter().map(|x| x / s));
            }
        }
    }

    fn log_density(&self, w: &[f64]) -> f64 {
        match self {
            PriorBlock::UniformBox { lo, hi, .. } => {
                if w.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| x >= l && x <= h) {
                    -lo.iter().zip(hi).map(|(l, h)| (h - l).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorBlock::Exponential { rate } => {
                if w[0] >= 0.0 {
                    rate.ln() - rate * w[0]
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorBlock::Dirichlet { alpha } => {
                let last = 1.0 - w.iter().sum::<f64>();
                if w.iter().any(|x| *x < 0.0) || last < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let norm = ln_gamma(alpha.iter().sum()) - alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>();
                let body: f64 = w.iter().chain(std::iter::once(&last)).zip(alpha).map(|(x, a)| xlogy(a - 1.0, *x)).sum();
                norm + body
            }
        }
    }

    fn to_natural(&self, w: &[f64], out: &mut Vec<f64>) {
        match self {
            PriorBlock::UniformBox { transform: Transform::Log10, .. } => out.extend(w.iter().map(|x| 10f64.powf(*x))),
            _ => out.extend_from_slice(w),
        }
    }

    fn to_working(&self, theta: &[f64], out: &mut Vec<f64>) {
        match self {
            PriorBlock::UniformBox { transform: Transform::Log10, .. } => out.extend(theta.iter().map(|x| x.log10())),
            _ => out.extend_from_slice(theta),
        }
    }
}

/// `a * ln(x)` with the convention `0 * ln(0) = 0`.
fn xlogy(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.ln()
    }
}

/// Product of independent blocks, concatenated in order.
///
/// Samplers move in *working* coordinates, where every block is a plain
/// density (a log10 box is uniform in `log10 theta`), and hand natural
/// parameters to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    blocks: Vec<PriorBlock>,
}

impl PriorSpec {
    pub fn new(blocks: Vec<PriorBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return input("prior has no blocks");
        }
        for b in &blocks {
            b.validate()?;
        }
        Ok(Self { blocks })
    }

    /// A single uniform box.
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, transform: Transform) -> Result<Self> {
        Self::new(vec![PriorBlock::UniformBox { lo, hi, transform }])
    }

    pub fn blocks(&self) -> &[PriorBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(PriorBlock::dim).sum()
    }

    pub fn sample_working<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            b.sample(rng, &mut out);
        }
        out
    }

    /// Draw in natural coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.to_natural(&self.sample_working(rng))
    }

    /// Normalized log density in working coordinates; `-inf` off the support.
    pub fn log_density_working(&self, w: &[f64]) -> f64 {
        let mut at = 0;
        let mut total = 0.0;
        for b in &self.blocks {
            let d = b.dim();
            total += b.log_density(&w[at..at + d]);
            at += d;
        }
        total
    }

    pub fn to_natural(&self, w: &[f64]) -> Vec<f64> {
        self.map(w, PriorBlock::to_natural)
    }

    pub fn to_working(&self, theta: &[f64]) -> Vec<f64> {
        self.map(theta, PriorBlock::to_working)
    }

    fn map(&self, x: &[f64], f: fn(&PriorBlock, &[f64], &mut Vec<f64>)) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        let mut at = 0;
        for b in &self.blocks {
            let d = b.dim();
            f(b, &x[at..at + d], &mut out);
            at += d;
        }
        out
    }
}
