//! Green function of simple random walk on Z^d (d >= 3).
//!
//! g(x) = sum_n P_0[X_n = x] is evaluated from the integral representation
//! g(x) = d * int_0^inf prod_i e^{-t} I_{x_i}(t) dt: adaptive Gauss-Legendre on
//! geometrically growing panels up to a cutoff T, plus the term-by-term integral of
//! the large-argument expansion of the integrand beyond T.

use std::sync::OnceLock;

use dashmap::DashMap;
use nalgebra::DMatrix;

use crate::bessel::{large_argument_coefficients, scaled_orders, MAX_ORDER};
use crate::error::{Error, Result};
use crate::lattice::Window;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_SOLVE_CAP: usize = 4096;

const GAUSS_POINTS: usize = 20;
const PANEL_RATIO: f64 = 1.5;
const MAX_DEPTH: u32 = 40;
const TAIL_TERMS: usize = 14;
/// Exact sphere maxima are only enumerated up to this many lattice shapes.

#[derive(Clone, Debug)]
pub struct GreenConfig {
    /// Absolute error target per evaluation.
    pub tolerance: f64,
    /// Largest |K| accepted by `green_matrix` and the equilibrium solver.
    pub solve_cap: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig { tolerance: DEFAULT_TOLERANCE, solve_cap: DEFAULT_SOLVE_CAP }
    }
}

/// Memoised, thread-safe Green function evaluator for a fixed dimension.
///
/// Values are cached under the sorted absolute coordinates, so g is evaluated once
/// per orbit of the hyperoctahedral group.
pub struct GreenEvaluator {
    d: usize,
    cfg: GreenConfig,
    cache: DashMap<Box<[u32]>, f64>,
}

impl std::fmt::Debug for GreenEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenEvaluator").field("d", &self.d).field("cached", &self.cache.len()).finish()
    }
}

impl GreenEvaluator {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_config(d, GreenConfig::default())
    }

    pub fn with_config(d: usize, cfg: GreenConfig) -> Result<Self> {
        if d < 3 {
            return Err(Error::Dimension(d, 3));
        }
        if !(cfg.tolerance > 0.0 && cfg.tolerance.is_finite()) {
            return Err(Error::OutOfRange(format!("tolerance {}", cfg.tolerance)));
        }
        Ok(GreenEvaluator { d, cfg, cache: DashMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tolerance(&self) -> f64 {
        self.cfg.tolerance
    }

    pub fn solve_cap(&self) -> usize {
        self.cfg.solve_cap
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn g0(&self) -> Result<f64> {
        self.green_key(&[])
    }

    pub fn green(&self, x: &[i64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        let mut key = Vec::with_capacity(self.d);
        canonical_key(x, &mut key)?;
        self.green_key(&key)
    }

    /// g(x - y) without allocating a point.
    pub fn green_diff(&self, x: &[i64], y: &[i64], key: &mut Vec<u32>) -> Result<f64> {
        key.clear();
        for (a, b) in x.iter().zip(y) {
            let v = (a - b).unsigned_abs();
            if v > MAX_ORDER as u64 {
                return Err(Error::OutOfRange(format!("coordinate {v}")));
            }
            if v != 0 {
                key.push(v as u32);
            }
        }
        key.sort_unstable_by(|a, b| b.cmp(a));
        self.green_key(key)
    }

    /// g at a canonical key: non-zero absolute coordinates sorted in decreasing order.
    pub fn green_key(&self, key: &[u32]) -> Result<f64> {
        if let Some(v) = self.cache.get(key) {
            return Ok(*v);
        }
        if key.len() > self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: key.len() });
        }
        let v = integrate(self.d, key, self.cfg.tolerance)?;
        self.cache.insert(key.to_vec().into_boxed_slice(), v);
        Ok(v)
    }

    /// Dense matrix (g(x - y))_{x, y in K}.
    pub fn green_matrix(&self, k: &Window) -> Result<DMatrix<f64>> {
        let n = k.len();
        if n > self.cfg.solve_cap {
            return Err(Error::SolveCapExceeded { size: n, cap: self.cfg.solve_cap });
        }
        if k.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: k.dim() });
        }
        let mut m = DMatrix::zeros(n, n);
        let mut key = Vec::with_capacity(self.d);
        for i in 0..n {
            for j in i..n {
                let v = self.green_diff(k.site(i), k.site(j), &mut key)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// max_{|y|_1 = m} g(y), attained at the most balanced point of the sphere.
    ///
    /// n -> e^{-t} I_n(t) is log-concave (Turan inequality), so the integrand of g is
    /// Schur-concave in |y| and spreading the l1 mass evenly maximises it.
    pub fn sphere_max(&self, m: i64) -> Result<f64> {
        if m < 0 {
            return Err(Error::OutOfRange(format!("radius {m}")));
        }
        self.green_key(&balanced_key(m as u32, self.d))
    }
}

/// Canonical key of the most balanced point with l1 norm m in d dimensions.
pub fn balanced_key(m: u32, d: usize) -> Vec<u32> {
    let (q, r) = (m / d as u32, m as usize % d);
    (0..d).map(|i| q + u32::from(i < r)).filter(|&v| v > 0).collect()
}

/// Sorted absolute coordinates with zeros dropped.
pub fn canonical_key(x: &[i64], key: &mut Vec<u32>) -> Result<()> {
    key.clear();
    for &c in x {
        let v = c.unsigned_abs();
        if v > MAX_ORDER as u64 {
            return Err(Error::OutOfRange(format!("coordinate {c}")));
        }
        if v != 0 {
            key.push(v as u32);
        }
    }
    key.sort_unstable_by(|a, b| b.cmp(a));
    Ok(())
}

/// Partitions of m into at most `parts` positive parts, in decreasing order.
/// Returns None when there are more than `limit`.
pub fn partitions(m: u32, parts: usize, limit: usize) -> Option<Vec<Vec<u32>>> {
    fn rec(rem: u32, max_part: u32, parts_left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, limit: usize) -> bool {
        if rem == 0 {
            out.push(cur.clone());
            return out.len() <= limit;
        }
        if parts_left == 0 {
            return true;
        }
        let top = rem.min(max_part);
        for p in (1..=top).rev() {
            // remaining parts cannot absorb the rest
            if (p as u64) * (parts_left as u64) < rem as u64 {
                break;
            }
            cur.push(p);
            let ok = rec(rem - p, p, parts_left - 1, cur, out, limit);
            cur.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    let mut out = Vec::new();
    let ok = rec(m, m, parts, &mut Vec::new(), &mut out, limit);
    ok.then_some(out)
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GAUSS_POINTS;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                    break;
                }
            }
        }
        (x, w)
    })
}

struct Integrand<'a> {
    /// (value, multiplicity) including zero coordinates
    groups: Vec<(usize, f64)>,
    buf: Vec<f64>,
    _key: &'a [u32],
}

impl<'a> Integrand<'a> {
    fn new(d: usize, key: &'a [u32]) -> Self {
        let mut groups: Vec<(usize, f64)> = Vec::new();
        let zeros = d - key.len();
        if zeros > 0 {
            groups.push((0, zeros as f64));
        }
        for &v in key {
            match groups.last_mut() {
                Some(g) if g.0 == v as usize => g.1 += 1.0,
                _ => groups.push((v as usize, 1.0)),
            }
        }
        let vmax = key.first().copied().unwrap_or(0) as usize;
        Integrand { groups, buf: vec![0.0; vmax + 1], _key: key }
    }

    fn eval(&mut self, t: f64) -> f64 {
        scaled_orders(t, &mut self.buf);
        let mut log = 0.0;
        for &(v, m) in &self.groups {
            let s = self.buf[v];
            if s <= 0.0 {
                return 0.0;
            }
            log += m * s.ln();
        }
        log.exp()
    }
}

fn gl(f: &mut Integrand, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    let mut s = 0.0;
    for i in 0..x.len() {
        s += w[i] * f.eval(c + h * x[i]);
    }
    s * h
}

fn adapt(f: &mut Integrand, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = gl(f, a, m);
    let right = gl(f, m, b);
    let halves = left + right;
    if (halves - whole).abs() <= tol.max(1e-15 * halves.abs()) {
        return Ok(halves);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!("panel [{a}, {b}] not resolved")));
    }
    Ok(adapt(f, a, m, left, 0.5 * tol, depth + 1)? + adapt(f, m, b, right, 0.5 * tol, depth + 1)?)
}

fn integrate(d: usize, key: &[u32], tol: f64) -> Result<f64> {
    let vmax = key.first().copied().unwrap_or(0) as f64;
    let mut cutoff = 64.0f64.max(8.0 * vmax * vmax + 64.0);
    let mut f = Integrand::new(d, key);
    for _attempt in 0..4 {
        let Some(tail) = tail_integral(d, &f.groups, cutoff, tol) else {
            cutoff *= 4.0;
            continue;
        };
        let mut edges = vec![0.0];
        let mut e = (2.0 / d as f64).min(0.5);
        while e < cutoff {
            edges.push(e);
            e *= PANEL_RATIO;
        }
        edges.push(cutoff);
        let panel_tol = tol / (d as f64 * edges.len() as f64);
        let mut body = 0.0;
        for w in edges.windows(2) {
            let whole = gl(&mut f, w[0], w[1]);
            body += adapt(&mut f, w[0], w[1], whole, panel_tol, 0)?;
        }
        return Ok(d as f64 * body + tail);
    }
    Err(Error::Quadrature(format!("tail expansion did not converge for key {key:?}")))
}

/// d * int_T^inf of the product of large-argument expansions, or None when the
/// expansion has not settled at T.
fn tail_integral(d: usize, groups: &[(usize, f64)], cutoff: f64, tol: f64) -> Option<f64> {
    let mut poly = vec![0.0; TAIL_TERMS];
    poly[0] = 1.0;
    for &(v, m) in groups {
        let c = large_argument_coefficients(v as u32, TAIL_TERMS);
        for _ in 0..m as usize {
            poly = poly_mul(&poly, &c);
        }
    }
    let half = d as f64 / 2.0;
    let log_pref = (d as f64).ln() - half * (2.0 * std::f64::consts::PI).ln();
    let mut sum = 0.0;
    let mut last = 0.0;
    for (k, &c) in poly.iter().enumerate() {
        let p = half + k as f64 - 1.0;
        let term = c * (log_pref + (1.0 - half - k as f64) * cutoff.ln()).exp() / p;
        sum += term;
        last = term;
    }
    (last.abs() <= 1e-3 * tol).then_some(sum)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Rigorous upper bound on sup_{|x|_1 >= m} P-sums of the walk, i.e. on g over the
/// complement of the l1 ball of radius m - 1, built from the Carne-Varopoulos bound,
/// the exact on-diagonal heat kernel and, beyond the table, the Fourier bound
/// P_0[X_n = 0] <= 2 (pi d / (8 n))^{d/2} from 1 - cos t >= 2 t^2 / pi^2.
#[derive(Clone, Debug)]
pub struct DecayBound {
    d: usize,
    /// p_even[k] = P_0[X_{2k} = 0]
    p_even: Vec<f64>,
}

impl DecayBound {
    /// Tabulates P_0[X_n = 0] for n <= horizon.
    pub fn new(d: usize, horizon: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::Dimension(d, 3));
        }
        let p = return_probabilities(d, horizon);
        let p_even = p.iter().step_by(2).copied().collect();
        Ok(DecayBound { d, p_even })
    }

    /// Upper bound on g(x) for every x with |x|_1 = m >= 1.
    pub fn sphere_bound(&self, m: i64) -> f64 {
        let m = m.max(1) as f64;
        let horizon = 2 * (self.p_even.len() - 1);
        let mut s = 0.0;
        let mut n = m as usize;
        while n <= horizon {
            let cv = 2.0 * (-m * m / (2.0 * n as f64)).exp();
            s += cv.min(self.p_even[n / 2]);
            n += 2;
        }
        // sum over n > horizon of 2 (pi d / (8 n))^{d/2}, every other n
        let h = self.d as f64 / 2.0;
        let start = (n as f64 - 3.0).max(1.0);
        s += 2.0 * (std::f64::consts::PI * self.d as f64 / 8.0).powf(h) * start.powf(1.0 - h) / (2.0 * (h - 1.0));
        s
    }
}

/// P_0[X_n = 0] for n = 0..=n_max, by convolving one-dimensional return
/// probabilities over the binomial split of steps between coordinates.
pub fn return_probabilities(d: usize, n_max: usize) -> Vec<f64> {
    let lf = log_factorials(n_max);
    let lc = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    // one coordinate: C(m, m/2) 2^{-m} for even m
    let one: Vec<f64> = (0..=n_max)
        .map(|m| if m % 2 == 0 { (lc(m, m / 2) - m as f64 * std::f64::consts::LN_2).exp() } else { 0.0 })
        .collect();
    let mut q = one.clone();
    for j in 2..=d {
        let (lp, lq) = ((1.0 / j as f64).ln(), (1.0 - 1.0 / j as f64).ln());
        let mut next = vec![0.0; n_max + 1];
        for (m, nm) in next.iter_mut().enumerate() {
            if m % 2 == 1 {
                continue;
            }
            let mut s = 0.0;
            for a in (0..=m).step_by(2) {
                let w = (lc(m, a) + a as f64 * lp + (m - a) as f64 * lq).exp();
                s += w * one[a] * q[m - a];
            }
            *nm = s;
        }
        q = next;
    }
    q
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

/// Large-d leading term of g at a canonical point: k! / prod x_i! (2d)^{-k}, k = |x|_1.
pub fn leading_term(d: usize, key: &[u32]) -> f64 {
    let k: u32 = key.iter().sum();
    let lf = log_factorials(k as usize);
    let mut log = lf[k as usize] - k as f64 * (2.0 * d as f64).ln();
    for &x in key {
        log -= lf[x as usize];
    }
    log.exp()
}

/// Parametrised large-d bounds: sup_{|x|_1 = k} g(x) <= c_k d^{-k} and
/// g(x) <= min(g(0), (c d / |x|_1)^{d/2 - 2}).
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticBounds {
    pub d: usize,
    pub k: u32,
    pub c_k: f64,
    pub c_decay: f64,
}

impl AsymptoticBounds {
    pub fn sup_bound(&self) -> f64 {
        self.c_k * (self.d as f64).powi(-(self.k as i32))
    }

    pub fn decay_bound(&self, g0: f64, norm1: i64) -> f64 {
        if norm1 == 0 {
            return g0;
        }
        let e = self.d as f64 / 2.0 - 2.0;
        g0.min((self.c_decay * self.d as f64 / norm1 as f64).powf(e))
    }
}

/// Bounds with constants supplied by the caller.
pub fn asymptotic_bounds(d: usize, k: u32, c_k: f64, c_decay: f64) -> Result<AsymptoticBounds> {
    if d < 3 {
        return Err(Error::Dimension(d, 3));
    }
    Ok(AsymptoticBounds { d, k, c_k, c_decay })
}

/// Smallest c_k with sup_{|x|_1 = k} g(x) <= c_k d^{-k} at the evaluator's dimension.
pub fn calibrate_sup_constant(ev: &GreenEvaluator, k: u32) -> Result<f64> {
    let best = ev.sphere_max(k as i64)?;
    Ok(best * (ev.dim() as f64).powi(k as i32))
}

/// Smallest c with g(x) <= (c d / |x|_1)^{d/2 - 2} over 1 <= |x|_1 <= m_max (d >= 5).
pub fn calibrate_decay_constant(ev: &GreenEvaluator, m_max: i64) -> Result<f64> {
    let d = ev.dim();
    if d < 5 {
        return Err(Error::Dimension(d, 5));
    }
    let e = d as f64 / 2.0 - 2.0;
    let mut c = 0.0f64;
    for m in 1..=m_max {
        let g = ev.sphere_max(m)?;
        c = c.max(m as f64 / d as f64 * g.powf(1.0 / e));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g0_three_dimensions() {
        let ev = GreenEvaluator::new(3).unwrap();
        let g0 = ev.g0().unwrap();
        assert!((g0 - 1.516_386_059_151_978).abs() < 1e-11, "{g0}");
    }

    #[test]
    fn neighbour_identity() {
        for d in 3..=6 {
            let ev = GreenEvaluator::new(d).unwrap();
            let mut e1 = vec![0; d];
            e1[0] = 1;
            let lhs = ev.green(&e1).unwrap();
            assert!((lhs - (ev.g0().unwrap() - 1.0)).abs() < 1e-11, "d={d}");
        }
    }

    #[test]
    fn partitions_count() {
        assert_eq!(partitions(5, 3, 100).unwrap().len(), 5);
        assert!(partitions(60, 10, 100).is_none());
    }

    #[test]
    fn return_probabilities_small() {
        let p = return_probabilities(3, 4);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn decay_bound_dominates() {
        let ev = GreenEvaluator::new(5).unwrap();
        let b = DecayBound::new(5, 2000).unwrap();
        for m in 1..8 {
            assert!(ev.sphere_max(m).unwrap() <= b.sphere_bound(m));
        }
    }

    #[test]
    fn fourier_tail_dominates_table() {
        for d in [3usize, 8, 12] {
            let p = return_probabilities(d, 1200);
            let h = d as f64 / 2.0;
            for n in (2..=1200).step_by(2) {
                assert!(p[n] <= 2.0 * (std::f64::consts::PI * d as f64 / (8.0 * n as f64)).powf(h));
            }
        }
    }

    #[test]
    fn balanced_point_maximises_sphere() {
        for d in [3usize, 5, 8] {
            let ev = GreenEvaluator::new(d).unwrap();
            for m in 1..=10u32 {
                let mut best = 0.0f64;
                for key in partitions(m, d, 10_000).unwrap() {
                    best = best.max(ev.green_key(&key).unwrap());
                }
                assert_eq!(best, ev.sphere_max(m as i64).unwrap(), "d = {d}, m = {m}");
            }
        }
    }
}
