//! Poisson sampling of the interlacement trace on a window.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, SiteSet, Window};
use crate::rng::{stream, Stream, Tag};
use crate::walk::{Trajectory, WalkSampler};

/// Trajectories of the interlacement at level `level` that meet `window`, with the
/// induced occupied and vacant sets.
#[derive(Clone, Debug)]
pub struct InterlacementSample {
    window: Arc<Window>,
    level: f64,
    trajectories: Vec<Trajectory>,
    occupied: SiteSet,
    vacant: SiteSet,
}

impl InterlacementSample {
    pub fn new(window: Arc<Window>, level: f64, trajectories: Vec<Trajectory>) -> Result<Self> {
        let mut occupied = SiteSet::empty(window.clone());
        for t in &trajectories {
            for &v in &t.visits {
                if v as usize >= window.len() {
                    return Err(Error::Format(format!("visit index {v} outside window")));
                }
                occupied.insert(v as usize);
            }
        }
        let vacant = occupied.complement();
        Ok(InterlacementSample { window, level, trajectories, occupied, vacant })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn occupied(&self) -> &SiteSet {
        &self.occupied
    }

    pub fn vacant(&self) -> &SiteSet {
        &self.vacant
    }

    /// The same cloud at a lower level: trajectories with label <= u.
    pub fn at_level(&self, u: f64) -> Result<Self> {
        if !(0.0..=self.level).contains(&u) {
            return Err(Error::Precondition(format!("level {u} outside [0, {}]", self.level)));
        }
        let kept = self.trajectories.iter().filter(|t| t.label <= u).cloned().collect();
        Self::new(self.window.clone(), u, kept)
    }
}

fn check_level(u: f64) -> Result<()> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::Precondition(format!("level u = {u}")));
    }
    Ok(())
}

fn poisson(rng: &mut Stream, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::Precondition(format!("poisson mean {mean}: {e}")))?;
    Ok(p.sample(rng) as u64)
}

/// Forward halves only: N ~ Poisson(u cap K) entrance points from the normalised
/// equilibrium measure, each followed by an independent walk.
pub fn sample_interlacement(ws: &WalkSampler, u: f64, rng: &mut Stream) -> Result<InterlacementSample> {
    sample_impl(ws, u, rng, false)
}

/// Doubly infinite trajectories: the backward half from the entrance point is a walk
/// conditioned never to return to K.
pub fn sample_doubly_infinite(ws: &WalkSampler, u: f64, rng: &mut Stream) -> Result<InterlacementSample> {
    sample_impl(ws, u, rng, true)
}

fn sample_impl(ws: &WalkSampler, u: f64, rng: &mut Stream, halves: bool) -> Result<InterlacementSample> {
    check_level(u)?;
    let profile = ws
        .profile()
        .ok_or_else(|| Error::Precondition("sampling needs an equilibrium measure".into()))?;
    let window = ws.window().clone();
    let n = poisson(rng, u * profile.capacity())?;
    let mut trajectories = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let label = rng.random::<f64>() * u;
        let x = ws.sample_entrance(rng)?;
        let mut t = ws.walk_until_escape(rng, window.site(x))?;
        t.label = label;
        if halves {
            t.backward = ws.walk_avoiding(rng, window.site(x))?;
        }
        trajectories.push(t);
    }
    InterlacementSample::new(window, u, trajectories)
}

/// `n` independent samples; sample i uses stream (seed, Sample, i).
pub fn sample_many(ws: &WalkSampler, u: f64, n: usize, seed: u64, halves: bool) -> Result<Vec<InterlacementSample>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Tag::Sample, i as u64);
            sample_impl(ws, u, &mut rng, halves)
        })
        .collect()
}

/// Keeps each trajectory with probability u'/u; kept labels are rescaled by u'/u so
/// the result is a sample at level u' and V^u is contained in V^{u'}.
pub fn thin_coupling(sample: &InterlacementSample, u_prime: f64, rng: &mut Stream) -> Result<InterlacementSample> {
    let u = sample.level();
    if !(0.0..=u).contains(&u_prime) {
        return Err(Error::Precondition(format!("thinning to {u_prime} from level {u}")));
    }
    let ratio = if u > 0.0 { u_prime / u } else { 0.0 };
    let mut kept = Vec::new();
    for t in sample.trajectories() {
        if rng.random::<f64>() < ratio {
            let mut t = t.clone();
            t.label *= ratio;
            kept.push(t);
        }
    }
    InterlacementSample::new(sample.window().clone(), u_prime, kept)
}

/// n_x for each target x: the number of trajectories whose first point of minimal
/// l1 norm (in time order over the doubly infinite path) is x.
pub fn occupation_numbers(sample: &InterlacementSample, targets: &[LatticePoint]) -> Result<Vec<u32>> {
    let mut index: FxHashMap<&[i64], usize> = FxHashMap::default();
    for (k, x) in targets.iter().enumerate() {
        index.insert(x.coords(), k);
    }
    let mut counts = vec![0u32; targets.len()];
    for t in sample.trajectories() {
        if !t.has_halves() {
            return Err(Error::Precondition("occupation numbers need doubly infinite trajectories".into()));
        }
        if t.has_gaps() {
            return Err(Error::Precondition("occupation numbers need gap-free (truncated) trajectories".into()));
        }
        let x = first_min_norm_point(t);
        if let Some(&k) = index.get(x.as_slice()) {
            counts[k] += 1;
        }
    }
    Ok(counts)
}

pub fn first_min_norm_point(t: &Trajectory) -> Vec<i64> {
    let mut best: Option<(i64, Vec<i64>)> = None;
    for p in t.time_ordered_points() {
        let n: i64 = p.iter().map(|c| c.abs()).sum();
        if best.as_ref().is_none_or(|(b, _)| n < *b) {
            best = Some((n, p));
        }
    }
    best.map(|(_, p)| p).unwrap_or_default()
}
