//! Green function from the walk series sum_n P_0[X_n = x], independent of the
//! Bessel quadrature. Partial sums are extrapolated in N by Richardson steps on the
//! known tail exponents d/2 - 1 + k.

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

/// P_0[X_n = x] for n = 0..=n_max.
pub fn transition_probabilities(x: &[i64], n_max: usize) -> Vec<f64> {
    let d = x.len();
    let lf = log_factorials(n_max);
    let lc = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    let one_dim = |target: i64| -> Vec<f64> {
        let t = target.unsigned_abs() as usize;
        (0..=n_max)
            .map(|m| {
                if m < t || (m - t) % 2 == 1 {
                    0.0
                } else {
                    (lc(m, (m + t) / 2) - m as f64 * std::f64::consts::LN_2).exp()
                }
            })
            .collect()
    };
    let mut q = one_dim(x[0]);
    for j in 2..=d {
        let p1 = one_dim(x[j - 1]);
        let (lp, lq) = ((1.0 / j as f64).ln(), (1.0 - 1.0 / j as f64).ln());
        let mut next = vec![0.0; n_max + 1];
        for (m, slot) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..=m {
                if p1[a] == 0.0 || q[m - a] == 0.0 {
                    continue;
                }
                s += (lc(m, a) + a as f64 * lp + (m - a) as f64 * lq).exp() * p1[a] * q[m - a];
            }
            *slot = s;
        }
        q = next;
    }
    q
}

/// Extrapolated series value of g(x) from partial sums at n0, 2 n0, ..., 2^levels n0.
pub fn green_series(x: &[i64], n0: usize, levels: u32) -> f64 {
    let d = x.len() as f64;
    let n_max = n0 << levels;
    let p = transition_probabilities(x, n_max);
    let mut partial = Vec::new();
    for l in 0..=levels {
        let n = n0 << l;
        partial.push(p[..=n].iter().sum::<f64>());
    }
    for k in 0..levels as usize {
        let e = d / 2.0 - 1.0 + k as f64;
        let f = 2f64.powf(e);
        partial = partial.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    partial[0]
}
