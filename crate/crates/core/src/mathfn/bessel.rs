//! Exponentially scaled modified Bessel functions of the first kind,
//! `e^{-z} I_n(z)` for integer order `n` and `z >= 0`.

use crate::error::{domain, Result};
use statrs::function::gamma::ln_gamma;

/// Largest order accepted by [`bessel_i_scaled`].
pub const MAX_ORDER: u64 = 1_000_000;

const SERIES_BELOW: f64 = 1.0;
const RESCALE_ABOVE: f64 = 1e250;

/// `e^{-z} I_{|order|}(z)`.
pub fn bessel_i_scaled(order: i64, z: f64) -> Result<f64> {
    let n = order.unsigned_abs();
    if n > MAX_ORDER {
        return domain(format!("Bessel order {order} exceeds {MAX_ORDER}"));
    }
    let seq = bessel_i_scaled_seq(n as usize, z)?;
    Ok(seq[n as usize])
}

/// `e^{-z} I_k(z)` for every `k` in `0..=max_order`, from one pass.
///
/// Small arguments use the power series directly. Otherwise Miller's
/// backward recurrence is normalized with `e^{-z} (I_0 + 2 sum_k I_k) = 1`,
/// which yields the scaled values without ever forming `I_k` itself.
pub fn bessel_i_scaled_seq(max_order: usize, z: f64) -> Result<Vec<f64>> {
    if !z.is_finite() || z < 0.0 {
        return domain(format!("Bessel argument must be finite and >= 0, got {z}"));
    }
    if max_order as u64 > MAX_ORDER {
        return domain(format!("Bessel order {max_order} exceeds {MAX_ORDER}"));
    }
    let mut out = vec![0.0; max_order + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    if z < SERIES_BELOW {
        for (n, v) in out.iter_mut().enumerate() {
            *v = series_scaled(n, z);
        }
        return Ok(out);
    }
    miller(&mut out, z);
    Ok(out)
}

fn series_scaled(n: usize, z: f64) -> f64 {
    let half = 0.5 * z;
    let lead = n as f64 * half.ln() - ln_gamma(n as f64 + 1.0) - z;
    if lead < -745.0 {
        return 0.0;
    }
    let quarter_sq = half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..200 {
        term *= quarter_sq / (j as f64 * (j + n) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    lead.exp() * sum
}

fn miller(out: &mut [f64], z: f64) {
    let max_order = out.len() - 1;
    let start = max_order + 50 + (10.0 * z.sqrt()).ceil() as usize;
    let two_over_z = 2.0 / z;
    // f_{k+1}, f_k
    let mut above = 0.0_f64;
    let mut cur = 1.0_f64;
    let mut tail_sum = 0.0_f64;
    for k in (1..=start).rev() {
        let below = above + k as f64 * two_over_z * cur;
        above = cur;
        cur = below;
        // `above` now holds f_k, `cur` holds f_{k-1}
        tail_sum += above;
        if k <= max_order {
            out[k] = above;
        }
        if cur.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            cur *= s;
            above *= s;
            tail_sum *= s;
            for v in out.iter_mut().skip(k.min(max_order + 1)) {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    let norm = cur + 2.0 * tail_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
}
