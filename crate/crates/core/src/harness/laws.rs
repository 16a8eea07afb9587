//! Comparison of empirical vacancy probabilities with exp(-u cap K), and the
//! thinning coupling between levels.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::interlacement::{sample_interlacement, thin_coupling, InterlacementSample};
use crate::lattice::{LatticePoint, SiteSet, Window};
use crate::potential::equilibrium_exact;
use crate::rng::{stream, Tag};
use crate::stats::{binomial_z, two_sample_z, wilson, Proportion, Z95};
use crate::walk::{EscapeConfig, WalkSampler};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSet {
    pub name: String,
    pub sites: Vec<LatticePoint>,
}

/// Five probe sets inside the unit hypercube {0,1}^d: the origin, an edge, a square,
/// two opposite corners and the whole cube.
pub fn standard_probes(d: usize) -> Vec<ProbeSet> {
    let o = LatticePoint::origin(d);
    let e = |i: usize| LatticePoint::unit(d, i);
    let all = LatticePoint::new(vec![1; d]);
    let cube = Window::hypercube(d).map(|w| w.points().collect()).unwrap_or_default();
    vec![
        ProbeSet { name: "origin".into(), sites: vec![o.clone()] },
        ProbeSet { name: "edge".into(), sites: vec![o.clone(), e(0)] },
        ProbeSet { name: "square".into(), sites: vec![o.clone(), e(0), e(1), e(0).add(&e(1))] },
        ProbeSet { name: "corners".into(), sites: vec![o, all] },
        ProbeSet { name: "cube".into(), sites: cube },
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawRow {
    pub d: usize,
    pub probe: String,
    pub size: usize,
    pub u: f64,
    pub capacity: f64,
    pub expected: f64,
    pub observed: Proportion,
    pub z: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawTable {
    pub rows: Vec<LawRow>,
    pub z_limit: f64,
    pub pass: bool,
}

/// Samples the interlacement on the hypercube at max(u_grid) and reads lower
/// levels off the same cloud by label filtering.
pub fn law_validation(
    ev: &Arc<GreenEvaluator>,
    probes: &[ProbeSet],
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
    escape: &EscapeConfig,
) -> Result<Vec<LawRow>> {
    let d = ev.dim();
    let window = Arc::new(Window::hypercube(d)?);
    let profile = Arc::new(equilibrium_exact(ev, window.clone())?);
    let ws = WalkSampler::new(ev.clone(), profile, escape)?;
    let u_top = u_grid.iter().copied().fold(0.0, f64::max);
    let probe_sets: Vec<SiteSet> = probes
        .iter()
        .map(|p| {
            if p.sites.iter().any(|x| !window.contains(x.coords())) {
                return Err(Error::Precondition(format!("probe {} leaves the sampling window", p.name)));
            }
            Ok(SiteSet::from_points(window.clone(), &p.sites))
        })
        .collect::<Result<_>>()?;
    let caps: Vec<f64> = probes
        .iter()
        .map(|p| Ok(equilibrium_exact(ev, Arc::new(Window::explicit(d, p.sites.clone())?))?.capacity()))
        .collect::<Result<_>>()?;
    // hits[probe][level]
    let hits: Vec<Vec<u64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<u64>>> {
            let mut rng = stream(seed, Tag::Sample, i as u64);
            let s = sample_interlacement(&ws, u_top, &mut rng)?;
            let mut out = vec![vec![0u64; u_grid.len()]; probes.len()];
            for (k, &u) in u_grid.iter().enumerate() {
                let v = s.at_level(u)?;
                for (p, set) in probe_sets.iter().enumerate() {
                    out[p][k] += u64::from(set.is_subset(v.vacant())?);
                }
            }
            Ok(out)
        })
        .try_reduce(
            || vec![vec![0u64; u_grid.len()]; probes.len()],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                Ok(a)
            },
        )?;
    let mut rows = Vec::new();
    for (p, probe) in probes.iter().enumerate() {
        for (k, &u) in u_grid.iter().enumerate() {
            let expected = (-u * caps[p]).exp();
            let s = hits[p][k];
            let z = binomial_z(s, n_samples as u64, expected);
            rows.push(LawRow {
                d,
                probe: probe.name.clone(),
                size: probe.sites.len(),
                u,
                capacity: caps[p],
                expected,
                observed: wilson(s, n_samples as u64, Z95),
                z,
                pass: z.abs() <= 4.0,
            });
        }
    }
    Ok(rows)
}

/// Runs the comparison over several dimensions and collects a pass/fail table.
pub fn law_validation_suite(
    d_list: &[usize],
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
    escape: &EscapeConfig,
) -> Result<LawTable> {
    let mut rows = Vec::new();
    for &d in d_list {
        let ev = Arc::new(GreenEvaluator::new(d)?);
        rows.extend(law_validation(&ev, &standard_probes(d), u_grid, n_samples, seed ^ d as u64, escape)?);
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(LawTable { rows, z_limit: 4.0, pass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingRow {
    pub probe: String,
    pub u: f64,
    pub thinned: Proportion,
    pub direct: Proportion,
    pub z: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingReport {
    pub levels: Vec<f64>,
    pub n_samples: usize,
    /// samples on which V(levels[0]) ⊆ V(levels[1]) ⊆ ... fails
    pub inclusion_failures: usize,
    pub rows: Vec<CouplingRow>,
    pub pass: bool,
}

/// Thins samples at levels[0] successively down the decreasing chain `levels`, checks
/// the vacant-set inclusions on every sample, and compares the thinned law at each
/// lower level with independent direct samples by a two-sample z-test.
pub fn coupling_check(
    ws: &WalkSampler,
    probes: &[ProbeSet],
    levels: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CouplingReport> {
    if levels.is_empty() || levels.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::Precondition("levels must be non-empty and non-increasing".into()));
    }
    let window = ws.window().clone();
    let sets: Vec<SiteSet> = probes.iter().map(|p| SiteSet::from_points(window.clone(), &p.sites)).collect();
    let k = levels.len();
    let tally = |rows: &mut Vec<Vec<u64>>, s: &InterlacementSample, level: usize| -> Result<()> {
        for (p, set) in sets.iter().enumerate() {
            rows[p][level] += u64::from(set.is_subset(s.vacant())?);
        }
        Ok(())
    };
    type Acc = (usize, Vec<Vec<u64>>, Vec<Vec<u64>>);
    let zero = || -> Acc { (0, vec![vec![0; k]; sets.len()], vec![vec![0; k]; sets.len()]) };
    let (failures, thinned, direct) = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Acc> {
            let mut acc = zero();
            let mut rng = stream(seed, Tag::Sample, i as u64);
            let mut cur = sample_interlacement(ws, levels[0], &mut rng)?;
            tally(&mut acc.1, &cur, 0)?;
            let mut thin_rng = stream(seed, Tag::Thin, i as u64);
            let mut ok = true;
            for (j, &u) in levels.iter().enumerate().skip(1) {
                let next = thin_coupling(&cur, u, &mut thin_rng)?;
                ok &= cur.vacant().is_subset(next.vacant())?;
                tally(&mut acc.1, &next, j)?;
                cur = next;
            }
            acc.0 += usize::from(!ok);
            for (j, &u) in levels.iter().enumerate() {
                let mut r = stream(seed, Tag::Custom(j as u64 + 1), i as u64);
                tally(&mut acc.2, &sample_interlacement(ws, u, &mut r)?, j)?;
            }
            Ok(acc)
        })
        .try_reduce(zero, |mut a, b| {
            a.0 += b.0;
            for (x, y) in a.1.iter_mut().flatten().zip(b.1.iter().flatten()) {
                *x += y;
            }
            for (x, y) in a.2.iter_mut().flatten().zip(b.2.iter().flatten()) {
                *x += y;
            }
            Ok(a)
        })?;
    let n = n_samples as u64;
    let mut rows = Vec::new();
    for (p, probe) in probes.iter().enumerate() {
        for (j, &u) in levels.iter().enumerate().skip(1) {
            let z = two_sample_z(thinned[p][j], n, direct[p][j], n);
            rows.push(CouplingRow {
                probe: probe.name.clone(),
                u,
                thinned: wilson(thinned[p][j], n, Z95),
                direct: wilson(direct[p][j], n, Z95),
                z,
                pass: z.abs() <= 4.0,
            });
        }
    }
    let pass = failures == 0 && rows.iter().all(|r| r.pass);
    Ok(CouplingReport { levels: levels.to_vec(), n_samples, inclusion_failures: failures, rows, pass })
}
