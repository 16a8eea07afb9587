//! Connected components of the vacant set, ubiquity and bridges.

use std::sync::Arc;

use petgraph::unionfind::UnionFind;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interlacement::InterlacementSample;
use crate::lattice::{boundary, dist1, LatticePoint, SiteSet, Window, WindowShape, UNION_SHIFTS};

pub const NOT_VACANT: u32 = u32::MAX;

/// Nearest-neighbour components of a site set inside its universe.
#[derive(Clone, Debug)]
pub struct ComponentDecomposition {
    universe: Arc<Window>,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    closure: Option<Vec<usize>>,
}

impl ComponentDecomposition {
    pub fn universe(&self) -> &Arc<Window> {
        &self.universe
    }

    /// Component of site i, or NOT_VACANT.
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// |closure(U) ∩ reference| per component, when a reference was given.
    pub fn closure_sizes(&self) -> Option<&[usize]> {
        self.closure.as_deref()
    }

    pub fn largest(&self) -> Option<u32> {
        (0..self.sizes.len()).max_by_key(|&k| (self.sizes[k], std::cmp::Reverse(k))).map(|k| k as u32)
    }

    pub fn members(&self, c: u32) -> SiteSet {
        SiteSet::from_indices(
            self.universe.clone(),
            self.labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i),
        )
    }
}

/// Components of `set` by union-find; labels are numbered in order of their smallest site.
/// With `reference`, also records |closure(U) ∩ reference| for each component U.
pub fn components(set: &SiteSet, reference: Option<&SiteSet>) -> Result<ComponentDecomposition> {
    let w = set.universe().clone();
    if let Some(r) = reference {
        if !Arc::ptr_eq(r.universe(), &w) && **r.universe() != *w {
            return Err(Error::UniverseMismatch);
        }
    }
    let n = w.len();
    let d = w.dim();
    let mut uf: UnionFind<u32> = UnionFind::new(n);
    let mut scratch = Vec::with_capacity(d);
    for i in set.iter() {
        for axis in 0..d {
            if let Some(j) = w.neighbor_index(i, axis, true, &mut scratch) {
                if set.contains(j) {
                    uf.union(i as u32, j as u32);
                }
            }
        }
    }
    let mut labels = vec![NOT_VACANT; n];
    let mut root_label: rustc_hash::FxHashMap<u32, u32> = Default::default();
    let mut sizes = Vec::new();
    for i in set.iter() {
        let r = uf.find_mut(i as u32);
        let next = sizes.len() as u32;
        let l = *root_label.entry(r).or_insert(next);
        if l == next {
            sizes.push(0);
        }
        sizes[l as usize] += 1;
        labels[i] = l;
    }
    let closure = reference.map(|r| {
        let mut counts = vec![0usize; sizes.len()];
        let mut seen: Vec<u32> = Vec::with_capacity(2 * d + 1);
        for s in r.iter() {
            seen.clear();
            if labels[s] != NOT_VACANT {
                seen.push(labels[s]);
            }
            for axis in 0..d {
                for up in [true, false] {
                    if let Some(j) = w.neighbor_index(s, axis, up, &mut scratch) {
                        let l = labels[j];
                        if l != NOT_VACANT && !seen.contains(&l) {
                            seen.push(l);
                        }
                    }
                }
            }
            for &l in &seen {
                counts[l as usize] += 1;
            }
        }
        counts
    });
    Ok(ComponentDecomposition { universe: w, labels, sizes, closure })
}

/// Components of the vacant set of a sample.
pub fn vacant_components(sample: &InterlacementSample) -> Result<ComponentDecomposition> {
    components(sample.vacant(), None)
}

/// Components of V ∩ sub, sub a sub-window of the sample window, with closure sizes
/// relative to sub.
pub fn components_in(vacant: &SiteSet, sub: &Arc<Window>) -> Result<ComponentDecomposition> {
    let v = vacant.restrict_to(sub);
    let full = SiteSet::full(sub.clone());
    components(&v, Some(&full))
}

/// The component U of a decomposition over a hypercube translate C_y with
/// |U| + |∂U ∩ C_y| >= (1 - d^{-2}) |C_y|. Uniqueness is enforced for d >= 5;
/// below that the largest qualifying component is returned.
pub fn ubiquitous_component(dec: &ComponentDecomposition) -> Result<Option<u32>> {
    let w = dec.universe();
    let d = w.dim() as f64;
    let closure = dec
        .closure_sizes()
        .ok_or_else(|| Error::Precondition("decomposition lacks closure sizes".into()))?;
    let threshold = (1.0 - d.powi(-2)) * w.len() as f64;
    let hits: Vec<u32> = (0..closure.len()).filter(|&k| closure[k] as f64 >= threshold).map(|k| k as u32).collect();
    if hits.len() > 1 && w.dim() >= 5 {
        return Err(Error::NonUnique(w.dim()));
    }
    Ok(hits.into_iter().max_by_key(|&k| dec.sizes()[k as usize]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UbiquityVerdict {
    /// translate offsets y, in the block order of the hypercube union
    pub translates: Vec<[i64; 2]>,
    /// size of the ubiquitous component of V ∩ C_y, if any
    pub ubiquitous_sizes: Vec<Option<usize>>,
    /// all five ubiquitous components lie in one component of V ∩ Ĉ
    pub linked: bool,
    pub holds: bool,
}

/// The event G_u on a sample over the hypercube union Ĉ: every translate C_y has a
/// ubiquitous component and they are connected to each other inside V ∩ Ĉ.
pub fn check_g_u(sample: &InterlacementSample) -> Result<UbiquityVerdict> {
    let w = sample.window();
    let WindowShape::HypercubeUnion { offset } = w.shape() else {
        return Err(Error::Precondition("G_u needs a sample on the hypercube union".into()));
    };
    let vacant = sample.vacant();
    let full = components(vacant, None)?;
    let mut sizes = Vec::new();
    let mut roots = Vec::new();
    for (b1, b2) in UNION_SHIFTS {
        let mut off = offset.coords().to_vec();
        off[0] += 2 * b1;
        off[1] += 2 * b2;
        let sub = Arc::new(Window::hypercube_at(LatticePoint::new(off))?);
        let dec = components_in(vacant, &sub)?;
        match ubiquitous_component(&dec)? {
            Some(k) => {
                sizes.push(Some(dec.sizes()[k as usize]));
                let site = dec.labels().iter().position(|&l| l == k).expect("non-empty component");
                let idx = w.index_of(sub.site(site)).expect("translate inside union");
                roots.push(Some(full.label(idx)));
            }
            None => {
                sizes.push(None);
                roots.push(None);
            }
        }
    }
    let linked = roots.iter().all(|r| r.is_some()) && roots.windows(2).all(|p| p[0] == p[1]);
    Ok(UbiquityVerdict {
        translates: UNION_SHIFTS.iter().map(|&(a, b)| [a, b]).collect(),
        holds: linked,
        ubiquitous_sizes: sizes,
        linked,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bridge {
    /// x in ∂_C A ∩ ∂_C B
    Single(usize),
    /// x in ∂_C A, y in ∂_C B, |x - y|_1 = 1
    Pair(usize, usize),
}

impl Bridge {
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Bridge::Single(x) => vec![x],
            Bridge::Pair(x, y) => vec![x, y],
        }
    }
}

/// Pairwise disjoint bridges between A and B in C avoiding M: first every site of
/// ∂_C A ∩ ∂_C B outside M, then a greedy maximal family of adjacent pairs.
pub fn find_bridges(a: &SiteSet, b: &SiteSet, m: &SiteSet) -> Result<Vec<Bridge>> {
    if !a.is_disjoint(b)? || !a.is_disjoint(m)? || !b.is_disjoint(m)? {
        return Err(Error::Bridges("A, B and M must be pairwise disjoint".into()));
    }
    let w = a.universe().clone();
    let d = w.dim();
    let da = boundary(a, None)?.outer.difference(m)?;
    let db = boundary(b, None)?.outer.difference(m)?;
    let mut used = SiteSet::empty(w.clone());
    let mut out = Vec::new();
    for x in da.intersection(&db)?.iter() {
        used.insert(x);
        out.push(Bridge::Single(x));
    }
    let mut scratch = Vec::with_capacity(d);
    for x in da.iter() {
        if used.contains(x) {
            continue;
        }
        'axes: for axis in 0..d {
            for up in [true, false] {
                if let Some(y) = w.neighbor_index(x, axis, up, &mut scratch) {
                    if db.contains(y) && !used.contains(y) {
                        used.insert(x);
                        used.insert(y);
                        out.push(Bridge::Pair(x, y));
                        break 'axes;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Checks the defining properties of a bridge family.
pub fn validate_bridges(a: &SiteSet, b: &SiteSet, m: &SiteSet, bridges: &[Bridge]) -> Result<()> {
    let w = a.universe();
    let da = boundary(a, None)?.outer;
    let db = boundary(b, None)?.outer;
    let mut seen = FxHashSet::default();
    for br in bridges {
        for s in br.sites() {
            if m.contains(s) {
                return Err(Error::Bridges(format!("site {s} in M")));
            }
            if !seen.insert(s) {
                return Err(Error::Bridges(format!("site {s} used twice")));
            }
        }
        match *br {
            Bridge::Single(x) => {
                if !(da.contains(x) && db.contains(x)) {
                    return Err(Error::Bridges(format!("single {x} not on both boundaries")));
                }
            }
            Bridge::Pair(x, y) => {
                if !(da.contains(x) && db.contains(y)) || dist1(w.site(x), w.site(y)) != 1 {
                    return Err(Error::Bridges(format!("pair ({x}, {y}) malformed")));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    /// sites visited by at least `crowd_threshold` distinct trajectories
    pub crowded_sites: usize,
    pub crowd_threshold: f64,
    /// max over trajectories of the number of steps spent in the window
    pub max_time_in_window: usize,
    pub trajectories: usize,
}

/// Crowded sites (>= alpha log d distinct trajectories) and maximal time in the window.
pub fn trajectory_diagnostics(sample: &InterlacementSample, alpha: f64) -> TrajectoryDiagnostics {
    let w = sample.window();
    let threshold = alpha * (w.dim() as f64).ln();
    let mut hits = vec![0u32; w.len()];
    let mut mark = vec![usize::MAX; w.len()];
    let mut max_time = 0;
    for (k, t) in sample.trajectories().iter().enumerate() {
        max_time = max_time.max(t.visits.len());
        for &v in &t.visits {
            if mark[v as usize] != k {
                mark[v as usize] = k;
                hits[v as usize] += 1;
            }
        }
    }
    TrajectoryDiagnostics {
        crowded_sites: hits.iter().filter(|&&h| h as f64 >= threshold).count(),
        crowd_threshold: threshold,
        max_time_in_window: max_time,
        trajectories: sample.trajectories().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_antipodal_sites_have_no_ubiquitous_component() {
        let w = Arc::new(Window::hypercube(3).unwrap());
        let v = SiteSet::from_indices(w.clone(), [0usize, 7]);
        let dec = components(&v, Some(&SiteSet::full(w))).unwrap();
        assert_eq!(dec.count(), 2);
        assert_eq!(ubiquitous_component(&dec).unwrap(), None);
    }

    #[test]
    fn full_cube_is_one_ubiquitous_component() {
        let w = Arc::new(Window::hypercube(5).unwrap());
        let dec = components(&SiteSet::full(w.clone()), Some(&SiteSet::full(w))).unwrap();
        assert_eq!(dec.count(), 1);
        assert_eq!(ubiquitous_component(&dec).unwrap(), Some(0));
    }

    #[test]
    fn bridges_need_disjoint_sets() {
        let w = Arc::new(Window::hypercube(3).unwrap());
        let a = SiteSet::from_indices(w.clone(), [0usize]);
        let m = SiteSet::empty(w);
        assert!(find_bridges(&a, &a, &m).is_err());
    }
}
