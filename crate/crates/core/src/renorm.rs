//! Arithmetic of the renormalisation scheme: the scale ladder, the energy bounds
//! eps_n, the recursion for b_n and the final series. Every inequality is kept as an
//! upper bound; a passing certificate means the bound chain closes numerically at
//! the given constants, not that percolation has been proved.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{calibrate_decay_constant, GreenEvaluator};

/// a = 1 / A_DENOMINATOR
pub const A_DENOMINATOR: u32 = 100;
pub const A: f64 = 1.0 / A_DENOMINATOR as f64;
/// Largest ladder entry accepted (the float computations need L_n finite).
const MAX_BITS: u64 = 1023;

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("not an integer: {s}"))))
            .collect()
    }
}

/// natural log of a big integer, accurate to double precision
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 60;
    (x >> shift).to_f64().expect("60-bit mantissa").ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    /// L_0, .., L_depth
    #[serde(with = "decimal")]
    pub l: Vec<BigUint>,
    /// ell_0, .., ell_{depth-1}
    #[serde(with = "decimal")]
    pub ell: Vec<BigUint>,
}

/// L_{n+1} = ell_n L_n with ell_n = 100 [L_n^a], in exact integers.
pub fn build_ladder(l0: &BigUint, n_max: usize) -> Result<ScaleLadder> {
    if *l0 < BigUint::from(2u32) {
        return Err(Error::Precondition(format!("L_0 = {l0} must be at least 2")));
    }
    if l0.bits() > MAX_BITS {
        return Err(Error::LadderOverflow { depth: 0 });
    }
    let mut l = vec![l0.clone()];
    let mut ell = Vec::with_capacity(n_max);
    for n in 0..n_max {
        let e = l[n].nth_root(A_DENOMINATOR) * 100u32;
        let next = &l[n] * &e;
        if next.bits() > MAX_BITS {
            return Err(Error::LadderOverflow { depth: n });
        }
        ell.push(e);
        l.push(next);
    }
    Ok(ScaleLadder { l, ell })
}

impl ScaleLadder {
    /// Number of steps n_max; L has depth + 1 entries.
    pub fn depth(&self) -> usize {
        self.ell.len()
    }

    pub fn l_f64(&self, n: usize) -> f64 {
        self.l[n].to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn ell_f64(&self, n: usize) -> f64 {
        self.ell[n].to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn ln_l(&self, n: usize) -> f64 {
        ln_big(&self.l[n])
    }

    /// Recomputes the ladder from L_0 and checks L_n >= L_0^{(1+a)^n} for every n.
    pub fn verify(&self) -> bool {
        let Ok(again) = build_ladder(&self.l[0], self.depth()) else { return false };
        let ln0 = self.ln_l(0);
        let growth = (0..self.l.len()).all(|n| self.ln_l(n) >= (1.0 + A).powi(n as i32) * ln0 * (1.0 - 1e-12));
        again == *self && growth
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpsilonParams {
    pub d: usize,
    pub u: f64,
    /// constant c in g(x) <= (c d / |x|_1)^{d/2 - 2}
    pub c_decay: f64,
}

/// log of 2u |D|^2 (c d / (L_{n+1}/4))^{d/2 - 2} with |D| = 9 L_n^2 2^d.
pub fn ln_epsilon_bound(ladder: &ScaleLadder, p: &EpsilonParams, n: usize) -> Result<f64> {
    if p.d < 5 {
        return Err(Error::Dimension(p.d, 5));
    }
    if !(p.u >= 0.0 && p.u <= p.d as f64) {
        return Err(Error::Precondition(format!("u = {} outside [0, d]", p.u)));
    }
    if n >= ladder.depth() {
        return Err(Error::OutOfRange(format!("eps_{n} needs L_{} but the ladder has depth {}", n + 1, ladder.depth())));
    }
    if p.u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let d = p.d as f64;
    let ln_d_box = 9f64.ln() + 2.0 * ladder.ln_l(n) + d * std::f64::consts::LN_2;
    let ln_decay = (4.0 * p.c_decay * d).ln() - ladder.ln_l(n + 1);
    Ok((2.0 * p.u).ln() + 2.0 * ln_d_box + (d / 2.0 - 2.0) * ln_decay)
}

pub fn epsilon_bound(ladder: &ScaleLadder, p: &EpsilonParams, n: usize) -> Result<f64> {
    Ok(ln_epsilon_bound(ladder, p, n)?.exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BPropagation {
    /// b_0, .., b_N
    pub b: Vec<f64>,
    /// b_n <= L_n^{-1/2}
    pub within: Vec<bool>,
    /// first n with b_n > L_n^{-1/2}
    pub first_violation: Option<usize>,
}

/// b_{n+1} = (ell_{n+1}/ell_n)^2 b_n^2 + c (ell_{n+1} ell_n)^2 eps_n, iterated while
/// eps_n and ell_{n+1} are available.
pub fn propagate_b(b0: f64, eps: &[f64], ladder: &ScaleLadder, c0: f64, c: f64) -> Result<BPropagation> {
    if c0 < 1.0 {
        return Err(Error::Precondition(format!("c_0 = {c0} must be at least 1")));
    }
    if b0 < 0.0 || eps.iter().any(|&e| e < 0.0) {
        return Err(Error::Precondition("b_0 and eps_n must be non-negative".into()));
    }
    let mut b = vec![b0];
    let mut n = 0;
    while n < eps.len() && n + 1 < ladder.depth() {
        let (e0, e1) = (ladder.ell_f64(n), ladder.ell_f64(n + 1));
        let r = e1 / e0;
        b.push(r * r * b[n] * b[n] + c * (e1 * e0).powi(2) * eps[n]);
        n += 1;
    }
    let within: Vec<bool> = b.iter().enumerate().map(|(n, &v)| v <= (-0.5 * ladder.ln_l(n)).exp()).collect();
    let first_violation = within.iter().position(|&w| !w);
    Ok(BPropagation { b, within, first_violation })
}

/// Does b_0 = L_0^{-1/2}, eps_n = L_n^{-1} keep b_n <= L_n^{-1/2} for n <= n_max?
pub fn induction_closes(l0: &BigUint, n_max: usize, c0: f64, c: f64) -> Result<bool> {
    let ladder = build_ladder(l0, n_max + 1)?;
    let eps: Vec<f64> = (0..=n_max).map(|n| (-ladder.ln_l(n)).exp()).collect();
    let out = propagate_b((-0.5 * ladder.ln_l(0)).exp(), &eps, &ladder, c0, c)?;
    Ok(out.b.len() == n_max + 1 && out.first_violation.is_none())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdScan {
    /// (log10 L_0, closes) over the grid
    pub grid: Vec<(f64, bool)>,
    /// smallest grid L_0 from which the induction closes at every larger grid point
    #[serde(with = "decimal_opt")]
    pub threshold: Option<BigUint>,
}

mod decimal_opt {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&x.to_str_radix(10)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        Ok(raw.and_then(|s| BigUint::parse_bytes(s.as_bytes(), 10)))
    }
}

/// L_0 = [10^{j / per_decade}] for j in [per_decade, max_log10 * per_decade].
pub fn l0_grid(max_log10: u32, per_decade: u32) -> Vec<BigUint> {
    let mut out: Vec<BigUint> = Vec::new();
    for j in per_decade..=max_log10 * per_decade {
        let (whole, frac) = (j / per_decade, j % per_decade);
        let mantissa = 10f64.powf(frac as f64 / per_decade as f64);
        let scaled = (mantissa * 1e15).floor() as u64;
        let v = if whole >= 15 {
            BigUint::from(scaled) * BigUint::from(10u32).pow(whole - 15)
        } else {
            BigUint::from(scaled) / BigUint::from(10u32).pow(15 - whole)
        };
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

pub fn induction_threshold(grid: &[BigUint], n_max: usize, c0: f64, c: f64) -> Result<ThresholdScan> {
    let mut flags = Vec::with_capacity(grid.len());
    for l0 in grid {
        flags.push((ln_big(l0) / std::f64::consts::LN_10, induction_closes(l0, n_max, c0, c)?));
    }
    let start = flags.iter().rposition(|f| !f.1).map_or(0, |i| i + 1);
    let threshold = grid.get(start).cloned();
    Ok(ThresholdScan { grid: flags, threshold })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailSum {
    pub x: f64,
    /// sum of the terms added
    pub partial: f64,
    /// rigorous bound on the omitted terms
    pub remainder: f64,
    pub terms: usize,
}

impl TailSum {
    pub fn upper(&self) -> f64 {
        self.partial + self.remainder
    }
}

/// sum_{n >= 0} x^{-(1/2)(1+a)^n}, summed until the geometric remainder bound is
/// below 1e-16 (t_{n+1} = t_n^{1+a}, so the ratio of consecutive terms after N is at
/// most t_N^a).
pub fn tail_sum(x: f64) -> Result<TailSum> {
    if x <= 1.0 {
        return Err(Error::Precondition(format!("tail sum diverges for x = {x}")));
    }
    let mut partial = 0.0;
    let mut ln_t = -0.5 * x.ln();
    let mut n = 0;
    loop {
        let t = ln_t.exp();
        partial += t;
        n += 1;
        ln_t *= 1.0 + A;
        let next = ln_t.exp();
        let q = (A * ln_t).exp();
        let remainder = next / (1.0 - q);
        if remainder < 1e-16 || n > 100_000 {
            return Ok(TailSum { x, partial, remainder, terms: n });
        }
    }
}

/// Smallest x (to relative precision 1e-10) with tail_sum(x).upper() < 1/2.
pub fn tail_threshold() -> Result<f64> {
    let (mut lo, mut hi) = (2f64.ln(), 200.0f64);
    if tail_sum(hi.exp())?.upper() >= 0.5 {
        return Err(Error::NoBracket("tail sum above 1/2 at x = e^200".into()));
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if tail_sum(mid.exp())?.upper() < 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateConfig {
    pub d: usize,
    pub u: f64,
    /// L_0 as a decimal integer
    pub l0: String,
    pub c0: f64,
    pub c1: f64,
    /// constant in front of eps_n in the b recursion; defaults to c0^2
    pub c_eps: Option<f64>,
    /// decay constant; calibrated from the Green function when absent
    pub c_decay: Option<f64>,
    pub n_max: usize,
    /// estimate (upper confidence value) of q_0
    pub q0: Option<f64>,
    /// estimate (upper confidence value) of P[G_u^c], used when q0 is absent
    pub p_gc: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelCondition {
    pub n: usize,
    pub eps: f64,
    pub b: f64,
    pub eps_ok: bool,
    pub b_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub d: usize,
    pub u: f64,
    pub l0: String,
    pub c0: f64,
    pub c1: f64,
    pub c_eps: f64,
    pub c_decay: f64,
    pub c_decay_calibrated: bool,
    pub q0: f64,
    pub b0: f64,
    pub conditions: Vec<LevelCondition>,
    /// sum_n (c_1 d)^{-(1/2)(1+a)^n}, upper value
    pub series_tail: f64,
    pub series_below_half: bool,
    pub pass: bool,
    pub first_failing: Option<usize>,
    pub statement: String,
}

/// Checks eps_n <= L_n^{-1} and b_n <= L_n^{-1/2} along the ladder from L_0.
pub fn percolation_certificate(ev: Option<&GreenEvaluator>, cfg: &CertificateConfig) -> Result<CertificateReport> {
    let l0 = BigUint::parse_bytes(cfg.l0.as_bytes(), 10)
        .ok_or_else(|| Error::Config(format!("l0: not an integer: {}", cfg.l0)))?;
    let (c_decay, calibrated) = match (cfg.c_decay, ev) {
        (Some(c), _) => (c, false),
        (None, Some(ev)) => {
            if ev.dim() != cfg.d {
                return Err(Error::DimensionMismatch { expected: cfg.d, got: ev.dim() });
            }
            (calibrate_decay_constant(ev, 16)?, true)
        }
        (None, None) => return Err(Error::Config("c_decay: absent and no Green evaluator to calibrate it".into())),
    };
    let c_eps = cfg.c_eps.unwrap_or(cfg.c0 * cfg.c0);
    let ladder = build_ladder(&l0, cfg.n_max + 1)?;
    let q0 = match (cfg.q0, cfg.p_gc) {
        (Some(q), _) => q,
        (None, Some(p)) => (9.0 * (2.0 * ladder.ln_l(0)).exp() * p).min(1.0),
        (None, None) => return Err(Error::Config("q0: neither q0 nor p_gc given".into())),
    };
    let b0 = cfg.c0 * ladder.ell_f64(0).powi(2) * q0;
    let p = EpsilonParams { d: cfg.d, u: cfg.u, c_decay };
    let eps: Vec<f64> = (0..=cfg.n_max).map(|n| epsilon_bound(&ladder, &p, n)).collect::<Result<_>>()?;
    let prop = propagate_b(b0, &eps, &ladder, cfg.c0, c_eps)?;
    let conditions: Vec<LevelCondition> = (0..prop.b.len())
        .map(|n| LevelCondition {
            n,
            eps: eps[n],
            b: prop.b[n],
            eps_ok: eps[n].ln() <= -ladder.ln_l(n),
            b_ok: prop.within[n],
        })
        .collect();
    let first_failing = conditions.iter().position(|c| !(c.eps_ok && c.b_ok));
    let series_tail = tail_sum(cfg.c1 * cfg.d as f64)?.upper();
    Ok(CertificateReport {
        d: cfg.d,
        u: cfg.u,
        l0: cfg.l0.clone(),
        c0: cfg.c0,
        c1: cfg.c1,
        c_eps,
        c_decay,
        c_decay_calibrated: calibrated,
        q0,
        b0,
        conditions,
        series_tail,
        series_below_half: series_tail < 0.5,
        pass: first_failing.is_none(),
        first_failing,
        statement: "pass means the upper-bound chain closes numerically at these constants; it is not a percolation proof"
            .into(),
    })
}

/// L_0 = [c_1 d] + 1
pub fn default_l0(c1: f64, d: usize) -> BigUint {
    let v = (c1 * d as f64).floor();
    if v < 1.0 {
        BigUint::one() + BigUint::one()
    } else {
        BigUint::from(v as u64) + BigUint::one()
    }
}
