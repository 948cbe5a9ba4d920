//! Multivariate Student-t with three degrees of freedom, the proposal family
//! of the adaptive importance sampler.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{input, Error, Result};

const DOF: f64 = 3.0;

/// Symmetric positive definite matrix together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Validate `m` and factor it. If the factorization fails, `eps * I` is
    /// added with `eps = 1e-8 * trace / dim` (or `1e-8` for a zero trace),
    /// growing tenfold up to `1e-2 * trace / dim` before giving up.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim {
            return input(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return input("matrix has non-finite entries");
        }
        let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return input(format!("matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        let m = (&m + m.transpose()) * 0.5;
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Self { matrix: m, chol });
        }
        let trace = m.trace();
        if trace < 0.0 {
            return Err(Error::NotPositiveDefinite(format!("negative trace {trace}")));
        }
        let mut eps = if trace > 0.0 { 1e-8 * trace / dim as f64 } else { 1e-8 };
        for _ in 0..7 {
            let reg = &m + DMatrix::identity(dim, dim) * eps;
            if let Some(chol) = Cholesky::new(reg.clone()) {
                return Ok(Self { matrix: reg, chol });
            }
            eps *= 10.0;
        }
        Err(Error::NotPositiveDefinite(format!("{dim}x{dim} matrix with trace {trace}")))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor `L` with `L L^T = self`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..self.dim()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `x^T self^{-1} x`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let mut v = DVector::from_column_slice(x);
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        v.norm_squared()
    }
}

fn check_dims(x: &[f64], m: &[f64], sigma: &SpdMatrix) -> Result<()> {
    if x.len() != m.len() || m.len() != sigma.dim() {
        return input(format!(
            "dimension mismatch: x={}, m={}, sigma={}",
            x.len(),
            m.len(),
            sigma.dim()
        ));
    }
    Ok(())
}

/// Log density of `t_3(m, sigma)` at `x`.
pub fn student_t3_logpdf(x: &[f64], m: &[f64], sigma: &SpdMatrix) -> Result<f64> {
    check_dims(x, m, sigma)?;
    let d = x.len() as f64;
    let diff: Vec<f64> = x.iter().zip(m).map(|(a, b)| a - b).collect();
    let q = sigma.mahalanobis_sq(&diff);
    Ok(ln_gamma(0.5 * (DOF + d)) - ln_gamma(0.5 * DOF)
        - 0.5 * d * (DOF * std::f64::consts::PI).ln()
        - 0.5 * sigma.ln_det()
        - 0.5 * (DOF + d) * (q / DOF).ln_1p())
}

/// One draw from `t_3(m, sigma)`: `m + L z sqrt(3 / w)` with `z ~ N(0, I)`
/// and `w ~ chi^2_3`.
pub fn student_t3_sample<R: Rng + ?Sized>(rng: &mut R, m: &[f64], sigma: &SpdMatrix) -> Result<Vec<f64>> {
    check_dims(m, m, sigma)?;
    let z: Vec<f64> = (0..m.len()).map(|_| rng.sample(StandardNormal)).collect();
    let w: f64 = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
    let scale = (DOF / w).sqrt();
    let lz = sigma.chol.l_dirty().lower_triangle() * DVector::from_vec(z);
    Ok(m.iter().zip(lz.iter()).map(|(mi, v)| mi + v * scale).collect())
}
