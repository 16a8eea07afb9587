//! Points, finite windows and site sets on Z^d.

use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_WINDOW_SITES: u64 = 1 << 31;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn origin(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    /// Unit vector e_i (0-based axis).
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut c = vec![0; d];
        c[axis] = 1;
        LatticePoint(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.0
    }

    pub fn norm1(&self) -> i64 {
        norm1(&self.0)
    }

    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| a * k).collect())
    }

    pub fn dist1(&self, other: &LatticePoint) -> i64 {
        dist1(&self.0, &other.0)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

pub fn norm1(x: &[i64]) -> i64 {
    x.iter().map(|c| c.abs()).sum()
}

pub fn dist1(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adjacency {
    /// |x - y|_1 = 1
    Nearest,
    /// |x - y|_inf = 1
    Star,
}

pub fn neighbors(p: &LatticePoint, mode: Adjacency) -> Result<Vec<LatticePoint>> {
    let d = p.dim();
    match mode {
        Adjacency::Nearest => {
            let mut out = Vec::with_capacity(2 * d);
            for i in 0..d {
                for s in [1, -1] {
                    let mut c = p.0.clone();
                    c[i] += s;
                    out.push(LatticePoint(c));
                }
            }
            Ok(out)
        }
        Adjacency::Star => {
            if d > 12 {
                return Err(Error::StarTooLarge(d));
            }
            let total = 3usize.pow(d as u32);
            let mut out = Vec::with_capacity(total - 1);
            for code in 0..total {
                let mut c = p.0.clone();
                let mut k = code;
                let mut zero = true;
                for ci in c.iter_mut() {
                    let off = (k % 3) as i64 - 1;
                    k /= 3;
                    if off != 0 {
                        zero = false;
                    }
                    *ci += off;
                }
                if !zero {
                    out.push(LatticePoint(c));
                }
            }
            Ok(out)
        }
    }
}

/// Number of sites of the l1 ball of radius r in Z^d: sum_k 2^k C(d,k) C(r,k).
pub fn ball_size(d: usize, r: u64) -> f64 {
    let mut total = 0.0;
    let kmax = (d as u64).min(r);
    for k in 0..=kmax {
        total += 2f64.powi(k as i32) * binom(d as u64, k) * binom(r, k);
    }
    total
}

fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WindowShape {
    /// l1 ball B_1(center, radius)
    Ball { center: LatticePoint, radius: u32 },
    /// corner + [0, side)^d
    Box { corner: LatticePoint, side: u32 },
    /// offset + {0,1}^d
    Hypercube { offset: LatticePoint },
    /// union of offset + {0,1}^d + 2y over y in {0, +-e_1, +-e_2}
    HypercubeUnion { offset: LatticePoint },
    Explicit,
}

/// Translates 2y used by the hypercube union, in block order.
pub const UNION_SHIFTS: [(i64, i64); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

/// A finite set of sites with a dense index.
#[derive(Clone, Debug)]
pub struct Window {
    d: usize,
    shape: WindowShape,
    coords: Vec<i64>,
    lookup: Option<FxHashMap<Box<[i64]>, u32>>,
    anchor: LatticePoint,
    radius: i64,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.shape == other.shape && self.coords == other.coords
    }
}

impl Window {
    pub fn ball(center: LatticePoint, radius: u32) -> Result<Self> {
        let d = center.dim();
        check_dim(d)?;
        let n = ball_size(d, radius as u64);
        if n > MAX_WINDOW_SITES as f64 {
            return Err(Error::WindowTooLarge(n as u64));
        }
        let mut coords = Vec::with_capacity(n as usize * d);
        let mut cur = vec![0i64; d];
        enumerate_ball(&mut cur, 0, radius as i64, &mut coords);
        for (k, c) in coords.iter_mut().enumerate() {
            *c += center.0[k % d];
        }
        Self::build(d, WindowShape::Ball { center, radius }, coords, true)
    }

    pub fn cube_box(corner: LatticePoint, side: u32) -> Result<Self> {
        let d = corner.dim();
        check_dim(d)?;
        if side == 0 {
            return Err(Error::EmptyWindow);
        }
        let n = (side as f64).powi(d as i32);
        if n > MAX_WINDOW_SITES as f64 {
            return Err(Error::WindowTooLarge(n as u64));
        }
        let n = n as usize;
        let mut coords = Vec::with_capacity(n * d);
        for idx in 0..n {
            let mut k = idx;
            for i in 0..d {
                coords.push(corner.0[i] + (k % side as usize) as i64);
                k /= side as usize;
            }
        }
        Self::build(d, WindowShape::Box { corner, side }, coords, false)
    }

    /// The unit hypercube {0,1}^d.
    pub fn hypercube(d: usize) -> Result<Self> {
        Self::hypercube_at(LatticePoint::origin(d))
    }

    /// offset + {0,1}^d; bit i of the site index is coordinate i minus offset_i.
    pub fn hypercube_at(offset: LatticePoint) -> Result<Self> {
        let d = offset.dim();
        check_dim(d)?;
        if d >= 31 {
            return Err(Error::WindowTooLarge(1u64 << d.min(63)));
        }
        let n = 1usize << d;
        let mut coords = Vec::with_capacity(n * d);
        for idx in 0..n {
            for i in 0..d {
                coords.push(offset.0[i] + ((idx >> i) & 1) as i64);
            }
        }
        Self::build(d, WindowShape::Hypercube { offset }, coords, false)
    }

    /// Translate C + 2y of the unit hypercube, y = (y1, y2, 0, ..., 0).
    pub fn hypercube_translate(d: usize, y1: i64, y2: i64) -> Result<Self> {
        let mut off = vec![0; d];
        off[0] = 2 * y1;
        if d > 1 {
            off[1] = 2 * y2;
        }
        Self::hypercube_at(LatticePoint(off))
    }

    /// Union of the five translates C + 2y, |y|_1 <= 1, y in the span of e_1, e_2.
    pub fn hypercube_union(d: usize) -> Result<Self> {
        Self::hypercube_union_at(LatticePoint::origin(d))
    }

    pub fn hypercube_union_at(offset: LatticePoint) -> Result<Self> {
        let d = offset.dim();
        check_dim(d)?;
        if !(2..28).contains(&d) {
            return Err(Error::OutOfRange(format!("hypercube union needs 2 <= d < 28, got {d}")));
        }
        let cube = 1usize << d;
        let mut coords = Vec::with_capacity(5 * cube * d);
        for (b1, b2) in UNION_SHIFTS {
            for idx in 0..cube {
                for i in 0..d {
                    let mut c = offset.0[i] + ((idx >> i) & 1) as i64;
                    if i == 0 {
                        c += 2 * b1;
                    } else if i == 1 {
                        c += 2 * b2;
                    }
                    coords.push(c);
                }
            }
        }
        Self::build(d, WindowShape::HypercubeUnion { offset }, coords, false)
    }

    /// Arbitrary finite set; duplicates are removed, order is lexicographic.
    pub fn explicit(d: usize, sites: Vec<LatticePoint>) -> Result<Self> {
        check_dim(d)?;
        let mut sites = sites;
        for s in &sites {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.dim() });
            }
        }
        sites.sort();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::EmptyWindow);
        }
        if sites.len() as u64 > MAX_WINDOW_SITES {
            return Err(Error::WindowTooLarge(sites.len() as u64));
        }
        let coords: Vec<i64> = sites.into_iter().flat_map(|p| p.0).collect();
        Self::build(d, WindowShape::Explicit, coords, true)
    }

    fn build(d: usize, shape: WindowShape, coords: Vec<i64>, hashed: bool) -> Result<Self> {
        let n = coords.len() / d;
        if n == 0 {
            return Err(Error::EmptyWindow);
        }
        let lookup = if hashed {
            let mut m = FxHashMap::with_capacity_and_hasher(n, Default::default());
            for i in 0..n {
                m.insert(coords[i * d..(i + 1) * d].to_vec().into_boxed_slice(), i as u32);
            }
            Some(m)
        } else {
            None
        };
        let anchor = match &shape {
            WindowShape::Ball { center, .. } => center.clone(),
            _ => {
                let mut a = vec![0i64; d];
                for (i, ai) in a.iter_mut().enumerate() {
                    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
                    for s in 0..n {
                        lo = lo.min(coords[s * d + i]);
                        hi = hi.max(coords[s * d + i]);
                    }
                    *ai = lo + (hi - lo) / 2;
                }
                LatticePoint(a)
            }
        };
        let radius = (0..n)
            .map(|s| dist1(&coords[s * d..(s + 1) * d], &anchor.0))
            .max()
            .unwrap_or(0);
        Ok(Window { d, shape, coords, lookup, anchor, radius })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> &WindowShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn site(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn point(&self, i: usize) -> LatticePoint {
        LatticePoint(self.site(i).to_vec())
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Reference point used for escape radii.
    pub fn anchor(&self) -> &LatticePoint {
        &self.anchor
    }

    /// max over sites of |x - anchor|_1.
    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index_of(x).is_some()
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if x.len() != self.d {
            return None;
        }
        match &self.shape {
            WindowShape::Box { corner, side } => {
                let mut idx = 0usize;
                let mut mul = 1usize;
                for i in 0..self.d {
                    let r = x[i] - corner.0[i];
                    if r < 0 || r >= *side as i64 {
                        return None;
                    }
                    idx += r as usize * mul;
                    mul *= *side as usize;
                }
                Some(idx)
            }
            WindowShape::Hypercube { offset } => {
                let mut idx = 0usize;
                for i in 0..self.d {
                    let r = x[i] - offset.0[i];
                    if !(0..=1).contains(&r) {
                        return None;
                    }
                    idx |= (r as usize) << i;
                }
                Some(idx)
            }
            WindowShape::HypercubeUnion { offset } => {
                let r0 = x[0] - offset.0[0];
                let r1 = x[1] - offset.0[1];
                let (b1, b2) = (r0.div_euclid(2), r1.div_euclid(2));
                let block = UNION_SHIFTS.iter().position(|&s| s == (b1, b2))?;
                let mut idx = (r0 - 2 * b1) as usize | (((r1 - 2 * b2) as usize) << 1);
                for i in 2..self.d {
                    let r = x[i] - offset.0[i];
                    if !(0..=1).contains(&r) {
                        return None;
                    }
                    idx |= (r as usize) << i;
                }
                Some((block << self.d) | idx)
            }
            WindowShape::Ball { .. } | WindowShape::Explicit => {
                self.lookup.as_ref().and_then(|m| m.get(x)).map(|&i| i as usize)
            }
        }
    }

    /// Index of the neighbour of site `i` along `axis` in direction `up`.
    pub fn neighbor_index(&self, i: usize, axis: usize, up: bool, scratch: &mut Vec<i64>) -> Option<usize> {
        if let WindowShape::Hypercube { .. } = self.shape {
            let bit = (i >> axis) & 1;
            return if (bit == 0) == up { Some(i ^ (1 << axis)) } else { None };
        }
        scratch.clear();
        scratch.extend_from_slice(self.site(i));
        scratch[axis] += if up { 1 } else { -1 };
        self.index_of(scratch)
    }

    pub fn descriptor(&self) -> WindowDescriptor {
        match &self.shape {
            WindowShape::Ball { center, radius } => WindowDescriptor {
                kind: "ball".into(),
                d: self.d,
                center: center.0.clone(),
                radius: *radius as i64,
                side: None,
                sites: None,
            },
            WindowShape::Box { corner, side } => WindowDescriptor {
                kind: "box".into(),
                d: self.d,
                center: corner.0.clone(),
                radius: 0,
                side: Some(*side),
                sites: None,
            },
            WindowShape::Hypercube { offset } => WindowDescriptor {
                kind: "hypercube".into(),
                d: self.d,
                center: offset.0.clone(),
                radius: 0,
                side: None,
                sites: None,
            },
            WindowShape::HypercubeUnion { offset } => WindowDescriptor {
                kind: "hypercube-union".into(),
                d: self.d,
                center: offset.0.clone(),
                radius: 0,
                side: None,
                sites: None,
            },
            WindowShape::Explicit => WindowDescriptor {
                kind: "explicit".into(),
                d: self.d,
                center: self.anchor.0.clone(),
                radius: self.radius,
                side: None,
                sites: Some(self.points().map(|p| p.0).collect()),
            },
        }
    }

    pub fn from_descriptor(desc: &WindowDescriptor) -> Result<Self> {
        let d = desc.d;
        let center = if desc.center.is_empty() { vec![0; d] } else { desc.center.clone() };
        if center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: center.len() });
        }
        let center = LatticePoint(center);
        match desc.kind.as_str() {
            "ball" => {
                let r = u32::try_from(desc.radius)
                    .map_err(|_| Error::Descriptor(format!("bad radius {}", desc.radius)))?;
                Window::ball(center, r)
            }
            "box" => {
                let side = desc.side.ok_or_else(|| Error::Descriptor("box needs `side`".into()))?;
                Window::cube_box(center, side)
            }
            "hypercube" => Window::hypercube_at(center),
            "hypercube-union" => Window::hypercube_union_at(center),
            "explicit" => {
                let sites = desc
                    .sites
                    .as_ref()
                    .ok_or_else(|| Error::Descriptor("explicit window needs `sites`".into()))?;
                Window::explicit(d, sites.iter().cloned().map(LatticePoint).collect())
            }
            other => Err(Error::Descriptor(format!("unknown kind `{other}`"))),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Dimension(d, 1));
    }
    Ok(())
}

fn enumerate_ball(cur: &mut Vec<i64>, i: usize, budget: i64, out: &mut Vec<i64>) {
    if i == cur.len() {
        out.extend_from_slice(cur);
        return;
    }
    for v in -budget..=budget {
        cur[i] = v;
        enumerate_ball(cur, i + 1, budget - v.abs(), out);
    }
    cur[i] = 0;
}

/// Window descriptor: `{kind, d, center, radius}` plus `side` (boxes) and `sites` (explicit sets).
/// For boxes `center` is the lowest corner; for hypercubes it is the offset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowDescriptor {
    pub kind: String,
    pub d: usize,
    #[serde(default)]
    pub center: Vec<i64>,
    #[serde(default)]
    pub radius: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Vec<i64>>>,
}

/// Subset of a fixed window, stored as a bit set over the window index.
#[derive(Clone, Debug)]
pub struct SiteSet {
    universe: Arc<Window>,
    bits: FixedBitSet,
}

impl PartialEq for SiteSet {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.universe, &other.universe) && self.bits == other.bits
    }
}

impl SiteSet {
    pub fn empty(universe: Arc<Window>) -> Self {
        let n = universe.len();
        SiteSet { universe, bits: FixedBitSet::with_capacity(n) }
    }

    pub fn full(universe: Arc<Window>) -> Self {
        let mut s = Self::empty(universe);
        s.bits.insert_range(..);
        s
    }

    pub fn from_indices(universe: Arc<Window>, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in idx {
            s.bits.insert(i);
        }
        s
    }

    /// Sites of `points` that lie in the universe; others are ignored.
    pub fn from_points<'a>(universe: Arc<Window>, points: impl IntoIterator<Item = &'a LatticePoint>) -> Self {
        let mut s = Self::empty(universe.clone());
        for p in points {
            if let Some(i) = universe.index_of(p.coords()) {
                s.bits.insert(i);
            }
        }
        s
    }

    pub fn universe(&self) -> &Arc<Window> {
        &self.universe
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits.contains(i)
    }

    pub fn contains_point(&self, x: &[i64]) -> bool {
        self.universe.index_of(x).is_some_and(|i| self.bits.contains(i))
    }

    pub fn insert(&mut self, i: usize) {
        self.bits.insert(i);
    }

    pub fn remove(&mut self, i: usize) {
        self.bits.set(i, false);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.bits.ones().map(|i| self.universe.point(i))
    }

    fn same_universe(&self, other: &SiteSet) -> Result<()> {
        if Arc::ptr_eq(&self.universe, &other.universe) || *self.universe == *other.universe {
            Ok(())
        } else {
            Err(Error::UniverseMismatch)
        }
    }

    pub fn union(&self, other: &SiteSet) -> Result<SiteSet> {
        self.same_universe(other)?;
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Ok(SiteSet { universe: self.universe.clone(), bits })
    }

    pub fn intersection(&self, other: &SiteSet) -> Result<SiteSet> {
        self.same_universe(other)?;
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Ok(SiteSet { universe: self.universe.clone(), bits })
    }

    pub fn difference(&self, other: &SiteSet) -> Result<SiteSet> {
        self.same_universe(other)?;
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        Ok(SiteSet { universe: self.universe.clone(), bits })
    }

    pub fn complement(&self) -> SiteSet {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        SiteSet { universe: self.universe.clone(), bits }
    }

    pub fn is_subset(&self, other: &SiteSet) -> Result<bool> {
        self.same_universe(other)?;
        Ok(self.bits.is_subset(&other.bits))
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> Result<bool> {
        self.same_universe(other)?;
        Ok(self.bits.is_disjoint(&other.bits))
    }

    /// Same sites, re-indexed over another window; sites outside it are dropped.
    pub fn restrict_to(&self, target: &Arc<Window>) -> SiteSet {
        let mut out = SiteSet::empty(target.clone());
        if target.dim() != self.universe.dim() {
            return out;
        }
        for j in 0..target.len() {
            if let Some(i) = self.universe.index_of(target.site(j)) {
                if self.bits.contains(i) {
                    out.bits.insert(j);
                }
            }
        }
        out
    }
}

/// Outer boundary, inner boundary and closure of a site set.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub outer: SiteSet,
    pub inner: SiteSet,
    pub closure: SiteSet,
}

/// Nearest-neighbour boundaries of `u` inside its universe.
///
/// The outer boundary only contains sites of the universe, further restricted to
/// `relative_to` when given. A site of `u` is on the inner boundary when one of its
/// neighbours in Z^d is not in `u` (and, with `relative_to`, lies in it).
pub fn boundary(u: &SiteSet, relative_to: Option<&SiteSet>) -> Result<Boundary> {
    if let Some(r) = relative_to {
        u.same_universe(r)?;
    }
    let w = u.universe().clone();
    let d = w.dim();
    let mut outer = SiteSet::empty(w.clone());
    let mut inner = SiteSet::empty(w.clone());
    let mut scratch = Vec::with_capacity(d);
    for i in u.iter() {
        for axis in 0..d {
            for up in [true, false] {
                match w.neighbor_index(i, axis, up, &mut scratch) {
                    Some(j) if !u.contains(j) => {
                        if relative_to.is_none_or(|r| r.contains(j)) {
                            outer.insert(j);
                            inner.insert(i);
                        }
                    }
                    Some(_) => {}
                    None => {
                        if relative_to.is_none() {
                            inner.insert(i);
                        }
                    }
                }
            }
        }
    }
    let closure = u.union(&outer)?;
    Ok(Boundary { outer, inner, closure })
}
