//! Finite-size proxy for the percolation level: the level at which the vacant set
//! of the box [0, n)^d stops crossing between the faces x_1 = 0 and x_1 = n - 1.
//!
//! A site is vacant at level u iff every trajectory through it has label > u, so
//! each sample has a crossing threshold u_c (the largest u with a crossing) found by
//! adding sites in decreasing order of their smallest label to a union-find with
//! two virtual face nodes. P[crossing at u] = P[u_c > u] and u_half is the median.

use std::sync::Arc;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::interlacement::{sample_interlacement, InterlacementSample};
use crate::lattice::{LatticePoint, Window};
use crate::potential::equilibrium_exact;
use crate::rng::{stream, Tag};
use crate::stats::{bootstrap_median, median, wilson, Proportion, Z95};
use crate::walk::{EscapeConfig, WalkSampler};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UstarConfig {
    pub d: usize,
    /// box side n
    pub side: u32,
    /// sampling level; thresholds above it are censored
    pub u_max: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub bootstrap: usize,
    /// levels at which the crossing probability is reported
    pub u_grid: Vec<f64>,
    #[serde(default)]
    pub escape: EscapeConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub u: f64,
    pub crossing: Proportion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UstarResult {
    pub d: usize,
    pub side: u32,
    pub u_max: f64,
    pub n_samples: usize,
    pub capacity: f64,
    /// per-sample thresholds, +inf when the box still crosses at u_max
    pub thresholds: Vec<f64>,
    pub censored: usize,
    pub u_half: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub curve: Vec<CrossingPoint>,
    pub event: String,
}

/// Largest level at which the vacant set crosses the box along axis 0; +inf if it
/// still crosses at the sample level.
pub fn crossing_threshold(sample: &InterlacementSample) -> f64 {
    let w = sample.window();
    let n = w.len();
    let d = w.dim();
    let mut lambda = vec![f64::INFINITY; n];
    for t in sample.trajectories() {
        for &v in &t.visits {
            let l = &mut lambda[v as usize];
            if t.label < *l {
                *l = t.label;
            }
        }
    }
    let lo = w.site(0)[0];
    let hi = (0..n).map(|i| w.site(i)[0]).max().unwrap_or(lo);
    let (left, right) = (n as u32, n as u32 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
    let mut uf: UnionFind<u32> = UnionFind::new(n + 2);
    let mut added = vec![false; n];
    let mut scratch = Vec::with_capacity(d);
    for &i in &order {
        added[i] = true;
        let x0 = w.site(i)[0];
        if x0 == lo {
            uf.union(i as u32, left);
        }
        if x0 == hi {
            uf.union(i as u32, right);
        }
        for axis in 0..d {
            for up in [true, false] {
                if let Some(j) = w.neighbor_index(i, axis, up, &mut scratch) {
                    if added[j] {
                        uf.union(i as u32, j as u32);
                    }
                }
            }
        }
        if uf.equiv(left, right) {
            return lambda[i];
        }
    }
    0.0
}

pub fn ustar_proxy(ev: &Arc<GreenEvaluator>, cfg: &UstarConfig) -> Result<UstarResult> {
    if ev.dim() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: ev.dim() });
    }
    if cfg.n_samples == 0 || cfg.side == 0 {
        return Err(Error::Config("n_samples and side must be positive".into()));
    }
    let window = Arc::new(Window::cube_box(LatticePoint::origin(cfg.d), cfg.side)?);
    let profile = Arc::new(equilibrium_exact(ev, window.clone())?);
    let ws = WalkSampler::new(ev.clone(), profile.clone(), &cfg.escape)?;
    let thresholds: Vec<f64> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, Tag::Sample, i as u64);
            Ok(crossing_threshold(&sample_interlacement(&ws, cfg.u_max, &mut rng)?))
        })
        .collect::<Result<_>>()?;
    let censored = thresholds.iter().filter(|t| t.is_infinite()).count();
    if 2 * censored >= thresholds.len() {
        return Err(Error::NoBracket(format!(
            "{censored} of {} samples still cross at u_max = {}",
            thresholds.len(),
            cfg.u_max
        )));
    }
    let u_half = median(&thresholds);
    let mut rng = stream(cfg.seed, Tag::Bootstrap, 0);
    let (ci_lower, ci_upper) = bootstrap_median(&thresholds, cfg.bootstrap.max(1), 0.95, &mut rng);
    let curve = cfg
        .u_grid
        .iter()
        .filter(|&&u| u <= cfg.u_max)
        .map(|&u| {
            let hits = thresholds.iter().filter(|&&t| t > u).count() as u64;
            CrossingPoint { u, crossing: wilson(hits, thresholds.len() as u64, Z95) }
        })
        .collect();
    Ok(UstarResult {
        d: cfg.d,
        side: cfg.side,
        u_max: cfg.u_max,
        n_samples: cfg.n_samples,
        capacity: profile.capacity(),
        thresholds,
        censored,
        u_half,
        ci_lower,
        ci_upper,
        curve,
        event: "vacant crossing of [0,n)^d between the faces x_1 = 0 and x_1 = n-1 (finite-size proxy)".into(),
    })
}
