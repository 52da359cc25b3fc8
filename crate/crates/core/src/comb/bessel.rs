//! Bessel functions of the first kind for integer order.
//!
//! Power series up to `x = 15`, Miller's downward recurrence with
//! Neumann-sum normalization above that. Support is `0 ≤ x ≤ 1e4` and
//! `|n| ≤ x + 200`.

use crate::error::{Error, Result};

pub const SERIES_LIMIT: f64 = 15.0;
pub const MAX_ARGUMENT: f64 = 1.0e4;
pub const ORDER_MARGIN: f64 = 200.0;

const RESCALE_ABOVE: f64 = 1.0e250;
const RESCALE_BY: f64 = 1.0e-250;

pub fn is_supported(n: i64, x: f64) -> bool {
    x.is_finite() && (0.0..=MAX_ARGUMENT).contains(&x) && (n.unsigned_abs() as f64) <= x + ORDER_MARGIN
}

/// `J_n(x)` for any integer order in the supported range.
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    if !is_supported(n, x) {
        return Err(Error::BesselRange { order: n, x });
    }
    let order = n.unsigned_abs();
    let value = if x <= SERIES_LIMIT {
        series(order, x)
    } else {
        miller(order, x)[order as usize]
    };
    Ok(if n < 0 && order % 2 == 1 { -value } else { value })
}

/// `J_0(x) ..= J_{n_top}(x)` in one pass.
pub fn bessel_j_orders(n_top: u64, x: f64) -> Result<Vec<f64>> {
    if !is_supported(n_top as i64, x) {
        return Err(Error::BesselRange {
            order: n_top as i64,
            x,
        });
    }
    if x <= SERIES_LIMIT {
        Ok((0..=n_top).map(|k| series(k, x)).collect())
    } else {
        Ok(miller(n_top, x))
    }
}

fn series(order: u64, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let mut term = 1.0;
    for j in 1..=order {
        term *= half / j as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u64;
    loop {
        k += 1;
        term *= -q / (k as f64 * (k + order) as f64);
        sum += term;
        if (k as f64) > half && term.abs() <= 1e-17 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if k > 400 {
            break;
        }
    }
    sum
}

fn miller(n_top: u64, x: f64) -> Vec<f64> {
    let reach = (n_top as f64).max(x.ceil());
    let mut start = (reach + 30.0 + (160.0 * reach).sqrt()) as u64;
    start += start % 2;

    let mut out = vec![0.0; n_top as usize + 1];
    let two_over_x = 2.0 / x;
    let mut above = 0.0f64;
    let mut current = 1.0e-30f64;
    let mut norm = 0.0f64;

    let mut k = start;
    loop {
        if k <= n_top {
            out[k as usize] = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        k -= 1;

        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            for v in out.iter_mut().skip(k as usize + 1) {
                *v *= RESCALE_BY;
            }
        }
    }
    for v in &mut out {
        *v /= norm;
    }
    out
}
