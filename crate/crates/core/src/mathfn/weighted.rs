use nalgebra::DMatrix;

use super::student_t::SpdMatrix;
use crate::error::{input, Result};

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return input("no weights");
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return input("weights must be finite and non-negative");
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return input("all weights are zero");
    }
    Ok(total)
}

/// Weighted mean and covariance `sum_i w_i (x_i - m)(x_i - m)^T` with the
/// weights normalized to one. The covariance is regularized by
/// [`SpdMatrix::new`] when it is singular.
pub fn weighted_mean_cov<P: AsRef<[f64]>>(points: &[P], weights: &[f64]) -> Result<(Vec<f64>, SpdMatrix)> {
    if points.len() != weights.len() {
        return input(format!("{} points but {} weights", points.len(), weights.len()));
    }
    let total = check_weights(weights)?;
    let dim = points[0].as_ref().len();
    if dim == 0 || points.iter().any(|p| p.as_ref().len() != dim) {
        return input("points must share a positive dimension");
    }
    let mut mean = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (m, x) in mean.iter_mut().zip(p.as_ref()) {
            *m += w / total * x;
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut diff = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let wn = w / total;
        for (d, (x, m)) in diff.iter_mut().zip(p.as_ref().iter().zip(&mean)) {
            *d = x - m;
        }
        for i in 0..dim {
            for j in 0..=i {
                cov[(i, j)] += wn * diff[i] * diff[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok((mean, SpdMatrix::new(cov)?))
}

/// Smallest value whose cumulative normalized weight exceeds `q`, over the
/// values with positive weight sorted ascending. For `q = 1` this is the
/// largest such value.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return input(format!("{} values but {} weights", values.len(), weights.len()));
    }
    let total = check_weights(weights)?;
    if !(0.0..=1.0).contains(&q) {
        return input(format!("quantile level {q} outside [0, 1]"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return input("NaN value");
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let target = q * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum > target {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("a positive weight exists")])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_match_plain_statistics() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5], vec![2.0, 4.0]];
        let (m, c) = weighted_mean_cov(&pts, &[1.0; 4]).unwrap();
        let n = pts.len() as f64;
        let pm: Vec<f64> = (0..2).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        for j in 0..2 {
            assert!((m[j] - pm[j]).abs() < 1e-15);
        }
        for a in 0..2 {
            for b in 0..2 {
                let pc = pts.iter().map(|p| (p[a] - pm[a]) * (p[b] - pm[b])).sum::<f64>() / n;
                assert!((c.matrix()[(a, b)] - pc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hand_arithmetic_mean() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let (m, _) = weighted_mean_cov(&pts, &[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(m, vec![0.25, 0.25]);
    }

    #[test]
    fn single_weight_degenerates_to_floor() {
        let pts = vec![vec![3.0, 1.0], vec![1.0, 0.0]];
        let (m, c) = weighted_mean_cov(&pts, &[0.0, 5.0]).unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
        assert!((c.matrix()[(0, 0)] - 1e-8).abs() < 1e-20);
        assert_eq!(c.matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let pts = vec![vec![1.0]];
        assert!(weighted_mean_cov(&pts, &[0.0]).is_err());
        assert!(weighted_mean_cov(&pts, &[f64::NAN]).is_err());
        assert!(weighted_quantile(&[], &[], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[-1.0], 0.5).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(weighted_quantile(&[1.0, 2.0, 3.0], &[1.0; 3], 0.5).unwrap(), 2.0);
        for q in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(weighted_quantile(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0], q).unwrap(), 3.0);
        }
        assert_eq!(weighted_quantile(&[0.0, 2.0], &[1.0, 1.0], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn quantile_matches_cumsum_oracle() {
        // Brute force: for each candidate v, total weight at or below v.
        let values = [4.0, 1.0, 3.0, 2.0];
        let weights = [1.0; 4];
        let oracle = |q: f64| {
            let mut cands = values.to_vec();
            cands.sort_by(f64::total_cmp);
            *cands
                .iter()
                .find(|&&v| values.iter().zip(&weights).filter(|(x, _)| **x <= v).map(|(_, w)| w).sum::<f64>() / 4.0 > q)
                .unwrap_or(&4.0)
        };
        assert_eq!(oracle(0.8), 4.0);
        for q in [0.0, 0.1, 0.25, 0.5, 0.8, 0.99, 1.0] {
            assert_eq!(weighted_quantile(&values, &weights, q).unwrap(), oracle(q));
        }
    }
}
