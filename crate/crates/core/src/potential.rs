//! Equilibrium measures, capacities and hitting probabilities of finite sets.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::lattice::Window;
use crate::rng::{stream, Tag};
use crate::walk::WalkSampler;

/// Weights in [-NEGATIVE_SLACK, 0) are treated as rounding noise and set to 0.
pub const NEGATIVE_SLACK: f64 = 1e-9;
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factorisation of the Green matrix of a window.
pub struct GreenSystem {
    window: Arc<Window>,
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl std::fmt::Debug for GreenSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenSystem").field("size", &self.window.len()).field("condition", &self.condition).finish()
    }
}

impl GreenSystem {
    pub fn new(ev: &GreenEvaluator, window: Arc<Window>) -> Result<Self> {
        let matrix = ev.green_matrix(&window)?;
        let chol = matrix.clone().cholesky().ok_or(Error::IllConditioned(f64::INFINITY))?;
        let condition = condition_estimate(&matrix, &chol);
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned(condition));
        }
        Ok(GreenSystem { window, matrix, chol, condition })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves G v = b with two steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(b);
        let mut v = self.chol.solve(&b);
        for _ in 0..2 {
            let r = &b - &self.matrix * &v;
            v += self.chol.solve(&r);
        }
        v.as_slice().to_vec()
    }

    /// max_i |(G v - b)_i|
    pub fn residual(&self, v: &[f64], b: &[f64]) -> f64 {
        let r = DVector::from_column_slice(b) - &self.matrix * DVector::from_column_slice(v);
        r.amax()
    }

    /// P_z[H_K < inf, X_{H_K} = y] for y in K, from g(z - .) = sum_y H(z, y) g(y - .) on K.
    pub fn hitting_distribution(&self, ev: &GreenEvaluator, z: &[i64]) -> Result<Vec<f64>> {
        let mut key = Vec::with_capacity(z.len());
        let mut rhs = Vec::with_capacity(self.window.len());
        for i in 0..self.window.len() {
            rhs.push(ev.green_diff(z, self.window.site(i), &mut key)?);
        }
        let mut h = self.solve(&rhs);
        for v in &mut h {
            *v = v.max(0.0);
        }
        Ok(h)
    }
}

fn condition_estimate(m: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let n = m.nrows();
    let start = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_034).fract());
    let mut v = start.normalize();
    let mut lmax = 0.0;
    for _ in 0..30 {
        let w = m * &v;
        lmax = w.norm();
        v = w / lmax;
    }
    let mut v = start.normalize();
    let mut inv = 0.0;
    for _ in 0..30 {
        let w = chol.solve(&v);
        inv = w.norm();
        v = w / inv;
    }
    lmax * inv
}

/// Equilibrium measure e_K with capacity and, for Monte Carlo estimates, standard errors.
#[derive(Clone)]
pub struct EquilibriumProfile {
    window: Arc<Window>,
    weights: Vec<f64>,
    capacity: f64,
    std_errors: Option<Vec<f64>>,
    residual: f64,
    system: Option<Arc<GreenSystem>>,
}

impl std::fmt::Debug for EquilibriumProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquilibriumProfile")
            .field("size", &self.window.len())
            .field("capacity", &self.capacity)
            .field("residual", &self.residual)
            .finish()
    }
}

impl EquilibriumProfile {
    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn std_errors(&self) -> Option<&[f64]> {
        self.std_errors.as_deref()
    }

    /// max_x |sum_y g(x - y) e(y) - 1| at solve time (0 for Monte Carlo profiles).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn system(&self) -> Option<&Arc<GreenSystem>> {
        self.system.as_ref()
    }

    /// 1 - min_x e_K(x) = sup_{x in K} P_x[return to K].
    pub fn sup_return(&self) -> f64 {
        1.0 - self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            sites: self.window.points().map(|p| p.into_coords()).collect(),
            weights: self.weights.clone(),
            std_errors: self.std_errors.clone(),
            capacity: self.capacity,
            residual: self.residual,
            condition: self.system.as_ref().map(|s| s.condition),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub sites: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    pub capacity: f64,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
}

/// Solves sum_y g(x - y) e(y) = 1 on K.
pub fn equilibrium_exact(ev: &GreenEvaluator, window: Arc<Window>) -> Result<EquilibriumProfile> {
    let system = Arc::new(GreenSystem::new(ev, window.clone())?);
    let ones = vec![1.0; window.len()];
    let mut weights = system.solve(&ones);
    let residual = system.residual(&weights, &ones);
    for (site, w) in weights.iter_mut().enumerate() {
        if *w < -NEGATIVE_SLACK {
            return Err(Error::NegativeWeight { site, weight: *w });
        }
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let capacity = weights.iter().sum();
    Ok(EquilibriumProfile { window, weights, capacity, std_errors: None, residual, system: Some(system) })
}

/// Monte Carlo estimate of e_K(x) = P_x[no return to K], `n_samples` walks per site.
///
/// Site i uses RNG stream (seed, EQUILIBRIUM, i), so the result does not depend on
/// the number of worker threads.
pub fn equilibrium_mc(sampler: &WalkSampler, n_samples: usize, seed: u64) -> Result<EquilibriumProfile> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be positive".into()));
    }
    let window = sampler.window().clone();
    let results: Vec<Result<f64>> = (0..window.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Tag::Equilibrium, i as u64);
            let mut escapes = 0usize;
            for _ in 0..n_samples {
                if sampler.escapes_from(&mut rng, window.site(i))? {
                    escapes += 1;
                }
            }
            Ok(escapes as f64 / n_samples as f64)
        })
        .collect();
    let weights = results.into_iter().collect::<Result<Vec<_>>>()?;
    let std_errors = weights.iter().map(|p| (p * (1.0 - p) / n_samples as f64).sqrt()).collect();
    let capacity = weights.iter().sum();
    Ok(EquilibriumProfile { window, weights, capacity, std_errors: Some(std_errors), residual: 0.0, system: None })
}

/// P_x[H_K < inf] = sum_y g(x - y) e_K(y), clamped to [0, 1].
pub fn hitting_probability(ev: &GreenEvaluator, profile: &EquilibriumProfile, x: &[i64]) -> Result<f64> {
    let w = profile.window();
    if w.contains(x) {
        return Ok(1.0);
    }
    let mut key = Vec::with_capacity(x.len());
    let mut h = 0.0;
    for (i, &e) in profile.weights().iter().enumerate() {
        if e != 0.0 {
            h += ev.green_diff(x, w.site(i), &mut key)? * e;
        }
    }
    Ok(h.clamp(0.0, 1.0))
}

/// Bounds on P_x[H_K < inf] from the last-exit decomposition:
/// sum_y g(x - y) / sup_z sum_y g(z - y) <= P_x[H_K < inf] <= sum_y g(x - y) / inf_z sum_y g(z - y),
/// with z ranging over K.
pub fn hitting_bounds(ev: &GreenEvaluator, window: &Window, x: &[i64]) -> Result<(f64, f64)> {
    let n = window.len();
    let mut key = Vec::with_capacity(x.len());
    let mut num = 0.0;
    for i in 0..n {
        num += ev.green_diff(x, window.site(i), &mut key)?;
    }
    let (lo, hi) = row_sum_range(ev, window)?;
    Ok(((num / hi).min(1.0), (num / lo).min(1.0)))
}

/// (min, max) over z in K of sum_{y in K} g(z - y).
pub fn row_sum_range(ev: &GreenEvaluator, window: &Window) -> Result<(f64, f64)> {
    let n = window.len();
    let mut key = Vec::with_capacity(window.dim());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += ev.green_diff(window.site(i), window.site(j), &mut key)?;
        }
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok((lo, hi))
}

/// sum_{x, y} e_A(x) g(x - y) e_B(y)
pub fn mutual_energy(ev: &GreenEvaluator, a: &EquilibriumProfile, b: &EquilibriumProfile) -> Result<f64> {
    let (wa, wb) = (a.window(), b.window());
    let mut key = Vec::new();
    let mut s = 0.0;
    for (i, &ea) in a.weights().iter().enumerate() {
        if ea == 0.0 {
            continue;
        }
        for (j, &eb) in b.weights().iter().enumerate() {
            if eb != 0.0 {
                s += ea * eb * ev.green_diff(wa.site(i), wb.site(j), &mut key)?;
            }
        }
    }
    Ok(s)
}

/// Right side of the exponential-moment bound for the time spent in K:
/// 1 + (e^lambda - 1) / (1 - e^lambda sup_return).
pub fn exp_moment_bound(lambda: f64, sup_return: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&sup_return) || lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Precondition(format!("lambda = {lambda}, sup_return = {sup_return}")));
    }
    let q = lambda.exp() * sup_return;
    if q >= 1.0 {
        return Err(Error::Precondition(format!("e^lambda * sup_return = {q} >= 1")));
    }
    Ok(1.0 + lambda.exp_m1() / (1.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePoint;

    #[test]
    fn singleton_capacity() {
        let ev = GreenEvaluator::new(3).unwrap();
        let w = Arc::new(Window::explicit(3, vec![LatticePoint::origin(3)]).unwrap());
        let p = equilibrium_exact(&ev, w).unwrap();
        assert!((p.capacity() - 1.0 / ev.g0().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pair_weights() {
        let ev = GreenEvaluator::new(3).unwrap();
        let w = Arc::new(Window::explicit(3, vec![LatticePoint::origin(3), LatticePoint::unit(3, 0)]).unwrap());
        let p = equilibrium_exact(&ev, w).unwrap();
        let g0 = ev.g0().unwrap();
        for &e in p.weights() {
            assert!((e - 1.0 / (2.0 * g0 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_diverges_near_threshold() {
        let lam: f64 = 0.1;
        let a = exp_moment_bound(lam, 0.5).unwrap();
        let b = exp_moment_bound(lam, 0.9).unwrap();
        assert!(b > a);
        assert!(exp_moment_bound(lam, (-lam).exp()).is_err());
    }
}
