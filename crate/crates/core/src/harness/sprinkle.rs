//! Experiments on the hypercube union Ĉ: the G_u sweep over levels and the
//! two-step sprinkling u0 -> u1 -> u2.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::interlacement::{sample_interlacement, thin_coupling};
use crate::lattice::Window;
use crate::levels::Levels;
use crate::potential::equilibrium_exact;
use crate::rng::{stream, Tag};
use crate::stats::{wilson, Moments, Proportion, Z95};
use crate::vacant::check_g_u;
use crate::walk::{EscapeConfig, WalkSampler};

fn union_sampler(ev: &Arc<GreenEvaluator>, escape: &EscapeConfig) -> Result<WalkSampler> {
    let d = ev.dim();
    let window = Arc::new(Window::hypercube_union(d)?);
    if window.len() > ev.solve_cap() {
        return Err(Error::Precondition(format!(
            "|Ĉ| = {} exceeds solve-cap = {}; raise solve-cap or lower d",
            window.len(),
            ev.solve_cap()
        )));
    }
    let profile = Arc::new(equilibrium_exact(ev, window)?);
    WalkSampler::new(ev.clone(), profile, escape)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub u: f64,
    pub g_u: Proportion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UbiquitySweep {
    pub d: usize,
    pub n_samples: usize,
    pub points: Vec<SweepPoint>,
    /// samples on which G_u holds at some level above one where it fails
    pub monotonicity_violations: usize,
}

/// P[G_u] over u_grid from one labelled cloud per sample at max(u_grid).
pub fn ubiquity_sweep(
    ev: &Arc<GreenEvaluator>,
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
    escape: &EscapeConfig,
) -> Result<UbiquitySweep> {
    let ws = union_sampler(ev, escape)?;
    let mut grid = u_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let top = grid.last().copied().unwrap_or(0.0);
    let per_sample: Vec<Vec<bool>> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<bool>> {
            let mut rng = stream(seed, Tag::Sample, i as u64);
            let s = sample_interlacement(&ws, top, &mut rng)?;
            grid.iter().map(|&u| Ok(check_g_u(&s.at_level(u)?)?.holds)).collect()
        })
        .collect::<Result<_>>()?;
    let n = n_samples as u64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let hits = per_sample.iter().filter(|v| v[k]).count() as u64;
            SweepPoint { u, g_u: wilson(hits, n, Z95) }
        })
        .collect();
    let monotonicity_violations =
        per_sample.iter().filter(|v| v.windows(2).any(|p| p[1] && !p[0])).count();
    Ok(UbiquitySweep { d: ev.dim(), n_samples, points, monotonicity_violations })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SprinkleReport {
    pub levels: Levels,
    pub n_samples: usize,
    /// every translate C_y has a ubiquitous component at u1
    pub cubes_ubiquitous_u1: Proportion,
    pub g_u0: Proportion,
    pub g_u1: Proportion,
    pub g_u2: Proportion,
    /// per-sample counts |V(u1) \ V(u0)| and |V(u2) \ V(u1)|
    pub gain_01: Moments,
    pub gain_12: Moments,
    /// samples with V(u0) ⊆ V(u1) ⊆ V(u2) violated
    pub inclusion_failures: usize,
    /// P[G_u2] >= P[cubes ubiquitous at u1] - 4 SE
    pub directional: bool,
}

/// Samples at u0 on Ĉ, thins to u1 and then to u2, and reports the events.
pub fn sprinkle_merge(
    ev: &Arc<GreenEvaluator>,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    escape: &EscapeConfig,
) -> Result<SprinkleReport> {
    let levels = Levels::new(ev, epsilon)?;
    if levels.u2 < 0.0 {
        return Err(Error::Precondition(format!("u2 = {} is negative; lower epsilon", levels.u2)));
    }
    let ws = union_sampler(ev, escape)?;
    struct Row {
        cubes: bool,
        g: [bool; 3],
        gains: [f64; 2],
        nested: bool,
    }
    let rows: Vec<Row> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Row> {
            let mut rng = stream(seed, Tag::Sample, i as u64);
            let s0 = sample_interlacement(&ws, levels.u0, &mut rng)?;
            let mut thin = stream(seed, Tag::Thin, i as u64);
            let s1 = thin_coupling(&s0, levels.u1, &mut thin)?;
            let s2 = thin_coupling(&s1, levels.u2, &mut thin)?;
            let v1 = check_g_u(&s1)?;
            let nested = s0.vacant().is_subset(s1.vacant())? && s1.vacant().is_subset(s2.vacant())?;
            Ok(Row {
                cubes: v1.ubiquitous_sizes.iter().all(Option::is_some),
                g: [check_g_u(&s0)?.holds, v1.holds, check_g_u(&s2)?.holds],
                gains: [
                    (s1.vacant().len() as f64 - s0.vacant().len() as f64),
                    (s2.vacant().len() as f64 - s1.vacant().len() as f64),
                ],
                nested,
            })
        })
        .collect::<Result<_>>()?;
    let n = n_samples as u64;
    let frac = |f: &dyn Fn(&Row) -> bool| wilson(rows.iter().filter(|r| f(r)).count() as u64, n, Z95);
    let cubes = frac(&|r| r.cubes);
    let g_u2 = frac(&|r| r.g[2]);
    let se = ((cubes.estimate * (1.0 - cubes.estimate) + g_u2.estimate * (1.0 - g_u2.estimate)) / n as f64).sqrt();
    Ok(SprinkleReport {
        n_samples,
        cubes_ubiquitous_u1: cubes,
        g_u0: frac(&|r| r.g[0]),
        g_u1: frac(&|r| r.g[1]),
        directional: g_u2.estimate >= cubes.estimate - 4.0 * se,
        g_u2,
        gain_01: Moments::of(rows.iter().map(|r| r.gains[0])),
        gain_12: Moments::of(rows.iter().map(|r| r.gains[1])),
        inclusion_failures: rows.iter().filter(|r| !r.nested).count(),
        levels,
    })
}
