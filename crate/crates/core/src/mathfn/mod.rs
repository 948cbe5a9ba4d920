//! Special functions and weighted-statistics primitives.

mod bessel;
mod rng;
mod student_t;
mod weighted;

pub use bessel::{bessel_i_scaled, bessel_i_scaled_seq, MAX_ORDER as BESSEL_MAX_ORDER};
pub use rng::{RngStream, StreamRng};
pub use student_t::{student_t3_logpdf, student_t3_sample, SpdMatrix};
pub use weighted::{weighted_mean_cov, weighted_quantile};

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
