//! Exponentially scaled modified Bessel functions e^{-z} I_n(z) of integer order.

use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 1 << 14;
pub const MAX_ARGUMENT: f64 = 1e8;

/// e^{-z} I_n(z) for integer n >= 0 and real z >= 0.
pub fn bessel_i_scaled(n: u32, z: f64) -> Result<f64> {
    check(n, z)?;
    let mut buf = vec![0.0; n as usize + 1];
    scaled_orders(z, &mut buf);
    Ok(buf[n as usize])
}

/// All orders 0..=n_max at once.
pub fn bessel_i_scaled_orders(n_max: u32, z: f64) -> Result<Vec<f64>> {
    check(n_max, z)?;
    let mut buf = vec![0.0; n_max as usize + 1];
    scaled_orders(z, &mut buf);
    Ok(buf)
}

fn check(n: u32, z: f64) -> Result<()> {
    if n > MAX_ORDER || !z.is_finite() || !(0.0..=MAX_ARGUMENT).contains(&z) {
        return Err(Error::OutOfRange(format!("bessel order {n}, argument {z}")));
    }
    Ok(())
}

/// Fills `out[k] = e^{-z} I_k(z)` by Miller's backward recurrence
/// I_{k-1} = I_{k+1} + (2k/z) I_k, normalised with I_0 + 2 sum_{k>=1} I_k = e^z.
pub(crate) fn scaled_orders(z: f64, out: &mut [f64]) {
    let n_max = out.len() - 1;
    if z == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    let start = n_max + 24 + (100.0 * z).sqrt().ceil() as usize;
    let mut next = 0.0f64;
    let mut cur = 1e-280f64;
    let mut sum = 0.0f64;
    for k in (1..=start).rev() {
        if k <= n_max {
            out[k] = cur;
        }
        sum += cur;
        let prev = next + (2.0 * k as f64 / z) * cur;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            sum *= 1e-250;
            if k <= n_max {
                for v in &mut out[k..] {
                    *v *= 1e-250;
                }
            }
        }
    }
    let norm = cur + 2.0 * sum;
    out[0] = cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
}

/// Coefficients a_k(n) of e^{-t} I_n(t) ~ (2 pi t)^{-1/2} sum_k (-1)^k a_k(n) t^{-k},
/// returned with the sign folded in.
pub(crate) fn large_argument_coefficients(n: u32, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut c = Vec::with_capacity(terms);
    let mut a = 1.0f64;
    c.push(1.0);
    for k in 1..terms {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0);
        c.push(if k % 2 == 1 { -a } else { a });
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_series(n: u32, z: f64) -> f64 {
        // I_n(z) = sum_m (z/2)^{2m+n} / (m! (m+n)!)
        let mut term = (0..n).fold(1.0, |acc, j| acc * (z / 2.0) / (j + 1) as f64);
        let mut s = term;
        for m in 1..400 {
            term *= (z / 2.0) * (z / 2.0) / (m as f64 * (m + n) as f64);
            s += term;
            if term < s * 1e-18 {
                break;
            }
        }
        s * (-z).exp()
    }

    #[test]
    fn matches_series_small_argument() {
        for &z in &[1e-3, 0.5, 1.0, 3.0, 10.0, 25.0] {
            for n in [0u32, 1, 2, 5, 13, 40, 64] {
                let a = bessel_i_scaled(n, z).unwrap();
                let b = power_series(n, z);
                if b > 1e-280 {
                    assert!(((a - b) / b).abs() < 1e-12, "n={n} z={z}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_i_scaled(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bessel_i_scaled(0, -1.0).is_err());
        assert!(bessel_i_scaled(0, f64::NAN).is_err());
        assert!(bessel_i_scaled(MAX_ORDER + 1, 1.0).is_err());
    }
}
