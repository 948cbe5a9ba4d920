//! Empirical likelihood for moment constraints, computed through the convex
//! dual in the Lagrange multiplier.
//!
//! For constraint rows `h_i` the weights are `p_i = 1 / (n (1 + lambda^T h_i))`
//! where `lambda` minimizes `-sum_i log*(1 + lambda^T h_i)` and `log*` is the
//! logarithm continued quadratically below `1/n`. The continuation keeps the
//! objective finite and twice differentiable on all of `R^q`, so a damped
//! Newton iteration started at zero is always well defined.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::constraints::{ConstraintProvider, Dataset};
use crate::error::{input, Result};

/// `n x q` matrix of constraint evaluations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl ConstraintMatrix {
    /// Row-major `data` of length `n * q`.
    pub fn new(n: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || q == 0 {
            return input(format!("constraint matrix must be non-empty, got {n}x{q}"));
        }
        if q > n {
            return input(format!("{q} constraints for {n} observations"));
        }
        if data.len() != n * q {
            return input(format!("expected {} entries, got {}", n * q, data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite constraint value at row {}, column {}", pos / q, pos % q));
        }
        Ok(Self { n, q, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let q = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != q) {
            return input("ragged constraint rows");
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), q, data)
    }

    pub fn from_column(col: Vec<f64>) -> Result<Self> {
        let n = col.len();
        Self::new(n, 1, col)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.q)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.q + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.q];
        for r in self.rows() {
            for (a, v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub hull_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-8, max_iter: 100, hull_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElStatus {
    Converged,
    /// Zero is not inside the convex hull of the rows; the likelihood is zero.
    HullViolation,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElSolution {
    /// `sum_i log p_i`, or `-inf` on a hull violation.
    pub log_el: f64,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub status: ElStatus,
    pub iterations: usize,
}

impl ElSolution {
    /// `log_el + n log n`: the log EL ratio against uniform weights, always `<= 0`.
    pub fn log_el_ratio(&self) -> f64 {
        let n = self.p.len() as f64;
        self.log_el + n * n.ln()
    }

    pub fn is_converged(&self) -> bool {
        self.status == ElStatus::Converged
    }

    fn hull_violation(n: usize, q: usize, iterations: usize) -> Self {
        Self {
            log_el: f64::NEG_INFINITY,
            lambda: vec![0.0; q],
            p: vec![0.0; n],
            status: ElStatus::HullViolation,
            iterations,
        }
    }
}

/// Quadratic continuation of `log` below `eps`, with first and second derivatives.
#[inline]
fn log_star(z: f64, eps: f64) -> (f64, f64, f64) {
    if z >= eps {
        (z.ln(), 1.0 / z, -1.0 / (z * z))
    } else {
        let r = z / eps;
        (eps.ln() - 1.5 + 2.0 * r - 0.5 * r * r, (2.0 - r) / eps, -1.0 / (eps * eps))
    }
}

struct Dual<'a> {
    rows: Vec<&'a [f64]>,
    q: usize,
    eps: f64,
}

impl Dual<'_> {
    fn z(&self, row: &[f64], lambda: &[f64]) -> f64 {
        1.0 + row.iter().zip(lambda).map(|(h, l)| h * l).sum::<f64>()
    }

    fn value_grad_hess(&self, lambda: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let q = self.q;
        let mut f = 0.0;
        let mut g = DVector::zeros(q);
        let mut hess = DMatrix::zeros(q, q);
        for r in &self.rows {
            let (v, d1, d2) = log_star(self.z(r, lambda), self.eps);
            f -= v;
            for a in 0..q {
                g[a] -= d1 * r[a];
                for b in 0..=a {
                    hess[(a, b)] -= d2 * r[a] * r[b];
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        (f, g, hess)
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let q = hess.nrows();
    if let Some(ch) = Cholesky::new(hess.clone()) {
        return -ch.solve(grad);
    }
    // Singular Hessian: a zero or collinear column. Ridge it.
    let scale = (hess.trace() / q as f64).max(f64::MIN_POSITIVE);
    let mut ridge = 1e-12 * scale;
    loop {
        let reg = hess + DMatrix::identity(q, q) * ridge;
        if let Some(ch) = Cholesky::new(reg) {
            return -ch.solve(grad);
        }
        ridge *= 100.0;
    }
}

/// A column that never changes sign (and is not identically zero) keeps
/// zero out of the interior of the hull.
fn one_sided_column(h: &ConstraintMatrix) -> bool {
    (0..h.q()).any(|j| {
        let (mut pos, mut neg) = (false, false);
        for r in h.rows() {
            pos |= r[j] > 0.0;
            neg |= r[j] < 0.0;
        }
        pos != neg
    })
}

/// `ft` is no larger than `f` up to a few ulps.
fn at_roundoff(ft: f64, f: f64) -> bool {
    ft <= f + 1e-13 * (1.0 + f.abs())
}

/// Maximize `sum_i log p_i` over the simplex subject to `sum_i p_i h_i = 0`.
pub fn el_solve(h: &ConstraintMatrix, cfg: &SolverConfig) -> ElSolution {
    solve_impl(h, cfg, None)
}

fn solve_impl(h: &ConstraintMatrix, cfg: &SolverConfig, mut trace: Option<&mut Vec<f64>>) -> ElSolution {
    let (n, q) = (h.n(), h.q());
    if one_sided_column(h) {
        return ElSolution::hull_violation(n, q, 0);
    }

    // Canonical row order makes the floating-point sums, and so the result,
    // exactly invariant to permutations of the input rows.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        h.row(a)
            .iter()
            .zip(h.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let dual = Dual { rows: order.iter().map(|&i| h.row(i)).collect(), q, eps: 1.0 / n as f64 };

    // sum_i p_i - 1 = -lambda' sum_i p_i h_i, so a small gradient alone is not
    // enough once lambda is large (zero close to the hull boundary).
    let grad_stop = n as f64 * cfg.grad_tol;
    let stationary = |g: &DVector<f64>, lambda: &[f64]| {
        let scale = 1.0 + lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        g.amax() * scale <= grad_stop
    };
    let mut lambda = vec![0.0; q];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (f, g, hess) = dual.value_grad_hess(&lambda);
        if let Some(t) = trace.as_deref_mut() {
            t.push(f);
        }
        if stationary(&g, &lambda) {
            converged = true;
            // Newton is quadratically convergent here: one more full step
            // takes the weights to machine precision.
            let d = newton_direction(&hess, &g);
            let trial: Vec<f64> = lambda.iter().zip(d.iter()).map(|(l, di)| l + di).collect();
            let (ft, gt, _) = dual.value_grad_hess(&trial);
            if at_roundoff(ft, f) && gt.amax() < g.amax() {
                lambda = trial;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(ft);
                }
            }
            break;
        }
        iterations += 1;
        let d = newton_direction(&hess, &g);
        let slope = g.dot(&d);
        // Not a descent direction, or NaN.
        if slope.is_nan() || slope >= 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-20 {
            let trial: Vec<f64> = lambda.iter().zip(d.iter()).map(|(l, di)| l + step * di).collect();
            let (ft, gt, _) = dual.value_grad_hess(&trial);
            // Armijo, or, once f no longer resolves the decrease, a smaller gradient.
            let armijo = ft <= f + 1e-4 * step * slope;
            if armijo || (at_roundoff(ft, f) && gt.amax() < g.amax()) {
                lambda = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // A gradient that is small only in absolute terms usually means lambda
    // ran off to infinity; the hull checks below sort that out.
    let mut small_grad = converged;
    if !converged {
        let (_, g, _) = dual.value_grad_hess(&lambda);
        converged = stationary(&g, &lambda);
        small_grad = g.amax() <= grad_stop;
    }

    let z: Vec<f64> = (0..n).map(|i| dual.z(h.row(i), &lambda)).collect();
    let p: Vec<f64> = z.iter().map(|zi| 1.0 / (n as f64 * zi)).collect();
    let min_z = z.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_p: f64 = order.iter().map(|&i| p[i]).sum();

    if small_grad {
        // At the true EL solution every p_i <= 1, i.e. z_i >= 1/n, and the
        // weights sum to one. Anything else came from the continuation or
        // from lambda running off to infinity along a separating direction.
        let tol = 1e-9 * dual.eps;
        if min_z <= cfg.hull_tol || min_z < dual.eps - tol || (sum_p - 1.0).abs() > 1e-6 {
            return ElSolution::hull_violation(n, q, iterations);
        }
    }
    if converged {
        let log_el = order.iter().map(|&i| p[i].ln()).sum();
        return ElSolution { log_el, lambda, p, status: ElStatus::Converged, iterations };
    }

    let usable = min_z > 0.0 && (sum_p - 1.0).abs() < 1e-3;
    let log_el = if usable { order.iter().map(|&i| p[i].ln()).sum() } else { f64::NEG_INFINITY };
    ElSolution { log_el, lambda, p, status: ElStatus::MaxIterations, iterations }
}

/// Why a parameter received the log EL it did.
#[derive(Debug, Clone, PartialEq)]
pub enum ElFlag {
    Converged,
    HullViolation,
    MaxIterations,
    /// The provider rejected the parameter (outside its support); `log_el = -inf`.
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElEvaluation {
    pub log_el: f64,
    pub flag: ElFlag,
}

/// Build the constraint matrix for `(dataset, theta)` and solve it.
pub fn el_log_likelihood<P: ConstraintProvider + ?Sized>(
    dataset: &Dataset,
    theta: &[f64],
    provider: &P,
    cfg: &SolverConfig,
) -> ElEvaluation {
    match provider.constraints(dataset, theta) {
        Err(e) => ElEvaluation { log_el: f64::NEG_INFINITY, flag: ElFlag::Domain(e.to_string()) },
        Ok(h) => {
            let sol = el_solve(&h, cfg);
            let flag = match sol.status {
                ElStatus::Converged => ElFlag::Converged,
                ElStatus::HullViolation => ElFlag::HullViolation,
                ElStatus::MaxIterations => ElFlag::MaxIterations,
            };
            ElEvaluation { log_el: sol.log_el, flag }
        }
    }
}
