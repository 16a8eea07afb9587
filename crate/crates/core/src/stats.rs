//! Interval estimates and test statistics used by the experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval at normal quantile z.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion { successes, trials, estimate: f64::NAN, lower: 0.0, upper: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion { successes, trials, estimate: p, lower: (centre - half).max(0.0), upper: (centre + half).min(1.0) }
}

/// (p_hat - p) / sqrt(p (1 - p) / n), using the hypothesised p in the standard error.
/// Returns 0 when both agree exactly at a degenerate p.
pub fn binomial_z(successes: u64, trials: u64, p: f64) -> f64 {
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let var = p * (1.0 - p) / n;
    if var == 0.0 {
        return if p_hat == p { 0.0 } else { f64::INFINITY };
    }
    (p_hat - p) / var.sqrt()
}

/// Pooled two-sample z statistic for equal proportions.
pub fn two_sample_z(s1: u64, n1: u64, s2: u64, n2: u64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let pooled = (s1 + s2) as f64 / (a + b);
    let var = pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b);
    let diff = s1 as f64 / a - s2 as f64 / b;
    if var == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    diff / var.sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Moments { n, mean, variance }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.n.max(1) as f64).sqrt()
    }
}

/// Sample Pearson correlation; 0 when either variance vanishes.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = Moments::of(xs.iter().copied());
    let my = Moments::of(ys.iter().copied());
    if mx.variance == 0.0 || my.variance == 0.0 {
        return 0.0;
    }
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx.mean) * (y - my.mean)).sum::<f64>() / (xs.len() - 1) as f64;
    cov / (mx.variance * my.variance).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Percentile bootstrap interval for the median.
pub fn bootstrap_median(xs: &[f64], resamples: usize, level: f64, rng: &mut Stream) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut meds = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; xs.len()];
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = xs[rng.random_range(0..xs.len())];
        }
        meds.push(median(&buf));
    }
    meds.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| meds[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let p = wilson(30, 100, Z95);
        assert!(p.lower < 0.3 && 0.3 < p.upper);
        let p = wilson(0, 50, Z95);
        assert!(p.lower < 1e-15);
        assert!(p.upper > 0.0);
    }

    #[test]
    fn degenerate_z_scores() {
        assert_eq!(binomial_z(10, 10, 1.0), 0.0);
        assert_eq!(two_sample_z(0, 5, 0, 7), 0.0);
    }

    #[test]
    fn moments_match_direct_formula() {
        let m = Moments::of([1.0, 2.0, 4.0]);
        assert!((m.mean - 7.0 / 3.0).abs() < 1e-15);
        assert!((m.variance - 7.0 / 3.0).abs() < 1e-14);
    }
}
