use super::{check_len, ConstraintProvider, Dataset};
use crate::el::ConstraintMatrix;
use crate::error::{input, Result};

/// Central-moment constraints for a unit-variance normal mean: columns
/// `y - theta`, `(y - theta)^2 - 1`, `(y - theta)^3`, the first `order` of them.
pub fn normal_moments(y: &[f64], theta: f64, order: usize) -> Result<ConstraintMatrix> {
    if !(1..=3).contains(&order) {
        return input(format!("moment order must be 1, 2 or 3, got {order}"));
    }
    let mut data = Vec::with_capacity(y.len() * order);
    for &v in y {
        let d = v - theta;
        data.push(d);
        if order >= 2 {
            data.push(d * d - 1.0);
        }
        if order >= 3 {
            data.push(d * d * d);
        }
    }
    ConstraintMatrix::new(y.len(), order, data)
}

#[derive(Debug, Clone, Copy)]
pub struct NormalMoments {
    pub order: usize,
}

impl ConstraintProvider for NormalMoments {
    fn n_params(&self) -> usize {
        1
    }

    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix> {
        check_len(theta, 1)?;
        normal_moments(data.as_iid()?, theta[0], self.order)
    }
}
