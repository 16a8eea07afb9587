//! Simple random walks started in a window and run until they escape it for good.
//!
//! Two escape rules are available.
//!
//! * `Truncate`: stop the walk at the first time its l1 distance from a protected
//!   region reaches a radius R certified so that the return probability from
//!   beyond R is at most tau. The omitted returns happen with probability <= tau.
//! * `ExactCoin`: stop at a moderate radius R, toss a coin with the exact return
//!   probability h(z) = sum_y g(z - y) e_K(y), and on return jump to the entrance
//!   point drawn from the exact hitting kernel H(z, .) = G_K^{-1} g(z - .). The trace
//!   on K has exactly the law of the full walk; the excursion outside K between
//!   exit and re-entry is not materialised, which splits the path into runs.

use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{DecayBound, GreenEvaluator};
use crate::lattice::{ball_size, LatticePoint, Window, WindowShape};
use crate::potential::{row_sum_range, EquilibriumProfile};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscapePolicy {
    /// Truncate when a radius within `auto_truncate_slack` of the window certifies, else coin.
    Auto,
    Truncate,
    ExactCoin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeConfig {
    pub tau_ret: f64,
    pub policy: EscapePolicy,
    /// Coin radius is window radius + coin_margin.
    pub coin_margin: i64,
    pub auto_truncate_slack: i64,
    /// Largest truncation radius searched, measured from the protected region.
    pub max_truncation_slack: i64,
    pub step_budget: u64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        EscapeConfig {
            tau_ret: 1e-6,
            policy: EscapePolicy::Auto,
            coin_margin: 3,
            auto_truncate_slack: 16,
            max_truncation_slack: 512,
            step_budget: 1 << 34,
        }
    }
}

/// Region whose re-entry must be excluded beyond the truncation radius.
#[derive(Clone, Debug)]
pub struct Protection {
    pub center: LatticePoint,
    /// max l1 distance from the center to the region
    pub radius: i64,
    pub count: f64,
    /// lower bound on inf_{z in region} sum_{y in region} g(z - y)
    pub denominator: f64,
}

impl Protection {
    pub fn of_window(ev: &GreenEvaluator, w: &Window) -> Result<Self> {
        let denominator = if w.len() <= ev.solve_cap() { row_sum_range(ev, w)?.0 } else { ev.g0()? };
        Ok(Protection { center: w.anchor().clone(), radius: w.radius(), count: w.len() as f64, denominator })
    }

    pub fn ball(ev: &GreenEvaluator, center: LatticePoint, radius: i64) -> Result<Self> {
        let d = center.dim();
        Ok(Protection { center, radius, count: ball_size(d, radius as u64), denominator: ev.g0()? })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeCertificate {
    pub radius: i64,
    pub bound: f64,
    pub tau: f64,
}

/// A radius R <= max_radius with |K| sup_{|y|_1 >= R - r_K} g(y) / denominator <= tau.
///
/// The sphere maximum is bounded by the walk-series bound, or computed exactly at the
/// balanced point of the l1 sphere, which bounds g outside the ball by the maximum
/// principle. The exact radius is found by bisection between the first radius where
/// the axis point passes and the first radius where the series bound passes.
pub fn certify_escape_radius(
    ev: &GreenEvaluator,
    decay: &DecayBound,
    prot: &Protection,
    tau: f64,
    max_radius: i64,
) -> Result<EscapeCertificate> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Precondition(format!("tau_ret = {tau}")));
    }
    let scale = prot.count / prot.denominator;
    let m_max = max_radius - prot.radius;
    let cert = |m: i64, sup: f64| EscapeCertificate { radius: prot.radius + m, bound: scale * sup, tau };
    let series = (1..=m_max).find(|&m| scale * decay.sphere_bound(m) <= tau);
    let mut axis = vec![0i64; ev.dim()];
    let mut lo = None;
    for m in 1..series.unwrap_or(m_max + 1) {
        axis[0] = m;
        if scale * ev.green(&axis)? <= tau {
            lo = Some(m);
            break;
        }
    }
    let mut best: Option<(i64, f64)> = None;
    if let Some(mut lo) = lo {
        let mut hi = series.unwrap_or(m_max + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let s = ev.sphere_max(mid)?;
            if scale * s <= tau {
                best = Some((mid, s));
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }
    match (best, series) {
        (Some((m, s)), _) => Ok(cert(m, s)),
        (None, Some(m)) => Ok(cert(m, decay.sphere_bound(m))),
        (None, None) => Err(Error::EscapeUncertified(format!(
            "no radius up to {max_radius} gives return probability <= {tau} for |K| = {}",
            prot.count
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum EscapeRule {
    Truncate { center: Vec<i64>, radius: i64, bound: f64 },
    ExactCoin { radius: i64 },
}

/// Nearest-neighbour path segment: a start point and step codes 2 * axis + (0 up, 1 down).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub start: Vec<i64>,
    pub steps: Vec<u8>,
}

impl Run {
    pub fn new(start: Vec<i64>) -> Self {
        Run { start, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> RunPoints<'_> {
        RunPoints { cur: self.start.clone(), steps: &self.steps, k: 0, first: true }
    }
}

pub struct RunPoints<'a> {
    cur: Vec<i64>,
    steps: &'a [u8],
    k: usize,
    first: bool,
}

impl Iterator for RunPoints<'_> {
    type Item = Vec<i64>;
    fn next(&mut self) -> Option<Vec<i64>> {
        if self.first {
            self.first = false;
            return Some(self.cur.clone());
        }
        let s = *self.steps.get(self.k)?;
        self.k += 1;
        apply_step(&mut self.cur, s);
        Some(self.cur.clone())
    }
}

#[inline]
pub fn apply_step(x: &mut [i64], code: u8) {
    let axis = (code >> 1) as usize;
    if code & 1 == 0 {
        x[axis] += 1;
    } else {
        x[axis] -= 1;
    }
}

/// One trajectory of the interlacement restricted to the window: forward half from
/// the entrance point and, optionally, the backward half (time reversed, starting at
/// the same point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub forward: Vec<Run>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backward: Vec<Run>,
    pub label: f64,
    /// window indices of the visited sites in time order (forward, then backward)
    pub visits: Vec<u32>,
}

impl Trajectory {
    /// Index of the entrance point among the forward points.
    pub fn entrance_index(&self) -> usize {
        0
    }

    pub fn entrance(&self) -> &[i64] {
        &self.forward[0].start
    }

    pub fn has_halves(&self) -> bool {
        !self.backward.is_empty()
    }

    /// True when some excursion outside the window was not materialised.
    pub fn has_gaps(&self) -> bool {
        self.forward.len() > 1 || self.backward.len() > 1
    }

    pub fn forward_points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        self.forward.iter().flat_map(|r| r.points())
    }

    /// Points of the doubly infinite path in increasing time order (backward half
    /// reversed, then forward half), counting the entrance point once.
    pub fn time_ordered_points(&self) -> Vec<Vec<i64>> {
        let mut back: Vec<Vec<i64>> = self.backward.iter().flat_map(|r| r.points()).skip(1).collect();
        back.reverse();
        back.extend(self.forward_points());
        back
    }

    pub fn steps(&self) -> usize {
        self.forward.iter().chain(&self.backward).map(|r| r.steps.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkEnd {
    Escaped,
    Returned,
}

struct CoinEntry {
    h: f64,
    kernel: OnceLock<std::result::Result<WeightedIndex<f64>, String>>,
}

/// Walk engine tied to a window (the set K) and an escape rule.
pub struct WalkSampler {
    ev: Arc<GreenEvaluator>,
    window: Arc<Window>,
    profile: Option<Arc<EquilibriumProfile>>,
    entrance: Option<WeightedIndex<f64>>,
    rule: EscapeRule,
    step_budget: u64,
    center2: Option<Vec<i64>>,
    coins: DashMap<Box<[i64]>, Arc<CoinEntry>>,
}

impl std::fmt::Debug for WalkSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WalkSampler").field("sites", &self.window.len()).field("rule", &self.rule).finish()
    }
}

impl WalkSampler {
    /// Sampler on the window of `profile`; the escape rule follows `cfg.policy`.
    pub fn new(ev: Arc<GreenEvaluator>, profile: Arc<EquilibriumProfile>, cfg: &EscapeConfig) -> Result<Self> {
        let window = profile.window().clone();
        let prot = Protection::of_window(&ev, &window)?;
        let rule = match cfg.policy {
            EscapePolicy::ExactCoin => coin_rule(&profile, &window, cfg)?,
            EscapePolicy::Truncate => truncate_rule(&ev, &prot, cfg, cfg.max_truncation_slack)?,
            EscapePolicy::Auto => match truncate_rule(&ev, &prot, cfg, cfg.auto_truncate_slack) {
                Ok(r) => r,
                Err(Error::EscapeUncertified(_)) => coin_rule(&profile, &window, cfg)?,
                Err(e) => return Err(e),
            },
        };
        Self::assemble(ev, window, Some(profile), rule, cfg)
    }

    /// Truncated walks protecting a larger region (for instance an l1 ball around the
    /// window), so that the part of each path inside the region is complete up to an
    /// event of probability tau.
    pub fn protected(
        ev: Arc<GreenEvaluator>,
        profile: Option<Arc<EquilibriumProfile>>,
        window: Arc<Window>,
        prot: &Protection,
        cfg: &EscapeConfig,
    ) -> Result<Self> {
        let rule = truncate_rule(&ev, prot, cfg, cfg.max_truncation_slack)?;
        Self::assemble(ev, window, profile, rule, cfg)
    }

    fn assemble(
        ev: Arc<GreenEvaluator>,
        window: Arc<Window>,
        profile: Option<Arc<EquilibriumProfile>>,
        rule: EscapeRule,
        cfg: &EscapeConfig,
    ) -> Result<Self> {
        if window.dim() != ev.dim() {
            return Err(Error::DimensionMismatch { expected: ev.dim(), got: window.dim() });
        }
        let entrance = match &profile {
            Some(p) if p.capacity() > 0.0 => Some(
                WeightedIndex::new(p.weights().iter().copied())
                    .map_err(|e| Error::Precondition(format!("entrance law: {e}")))?,
            ),
            _ => None,
        };
        let center2 = symmetry_center(&window);
        Ok(WalkSampler {
            ev,
            window,
            profile,
            entrance,
            rule,
            step_budget: cfg.step_budget,
            center2,
            coins: DashMap::new(),
        })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn profile(&self) -> Option<&Arc<EquilibriumProfile>> {
        self.profile.as_ref()
    }

    pub fn evaluator(&self) -> &Arc<GreenEvaluator> {
        &self.ev
    }

    pub fn rule(&self) -> &EscapeRule {
        &self.rule
    }

    pub fn is_gap_free(&self) -> bool {
        matches!(self.rule, EscapeRule::Truncate { .. })
    }

    /// Entrance point drawn from the normalised equilibrium measure.
    pub fn sample_entrance(&self, rng: &mut Stream) -> Result<usize> {
        self.entrance
            .as_ref()
            .map(|w| w.sample(rng))
            .ok_or_else(|| Error::Precondition("sampler has no equilibrium measure".into()))
    }

    /// Forward walk from `start` until it escapes; returns the trajectory with label 0.
    pub fn walk_until_escape(&self, rng: &mut Stream, start: &[i64]) -> Result<Trajectory> {
        let mut runs = Vec::new();
        let mut visits = Vec::new();
        self.walk(rng, start, false, Some(&mut runs), Some(&mut visits))?;
        Ok(Trajectory { forward: runs, backward: Vec::new(), label: 0.0, visits })
    }

    /// Walk from `start` (a site of K) conditioned on never returning to K at
    /// positive times, by rejection.
    pub fn walk_avoiding(&self, rng: &mut Stream, start: &[i64]) -> Result<Vec<Run>> {
        loop {
            let mut runs = Vec::new();
            if self.walk(rng, start, true, Some(&mut runs), None)? == WalkEnd::Escaped {
                return Ok(runs);
            }
        }
    }

    /// Does a walk from `start` avoid K at all positive times?
    pub fn escapes_from(&self, rng: &mut Stream, start: &[i64]) -> Result<bool> {
        Ok(self.walk(rng, start, true, None, None)? == WalkEnd::Escaped)
    }

    /// Total number of visits to K of a walk from `start`, time 0 included.
    pub fn count_visits(&self, rng: &mut Stream, start: &[i64]) -> Result<u64> {
        let mut visits = Vec::new();
        self.walk(rng, start, false, None, Some(&mut visits))?;
        Ok(visits.len() as u64)
    }

    fn walk(
        &self,
        rng: &mut Stream,
        start: &[i64],
        stop_on_return: bool,
        mut runs: Option<&mut Vec<Run>>,
        mut visits: Option<&mut Vec<u32>>,
    ) -> Result<WalkEnd> {
        let d = self.window.dim();
        let w = &*self.window;
        let wa = w.anchor().coords();
        let wr = w.radius();
        let (pc, radius, truncate): (&[i64], i64, bool) = match &self.rule {
            EscapeRule::Truncate { center, radius, .. } => (center, *radius, true),
            EscapeRule::ExactCoin { radius } => (wa, *radius, false),
        };
        let mut pos = start.to_vec();
        let mut dw: i64 = pos.iter().zip(wa).map(|(a, b)| (a - b).abs()).sum();
        let mut dp: i64 = pos.iter().zip(pc).map(|(a, b)| (a - b).abs()).sum();
        if let Some(r) = runs.as_mut() {
            r.push(Run::new(pos.clone()));
        }
        if let Some(v) = visits.as_mut() {
            if let Some(i) = w.index_of(&pos) {
                v.push(i as u32);
            }
        }
        let mut steps = 0u64;
        let two_d = 2 * d as u32;
        loop {
            let code = rng.random_range(0..two_d) as u8;
            let axis = (code >> 1) as usize;
            let s: i64 = if code & 1 == 0 { 1 } else { -1 };
            let old = pos[axis];
            let new = old + s;
            pos[axis] = new;
            dw += (new - wa[axis]).abs() - (old - wa[axis]).abs();
            dp += (new - pc[axis]).abs() - (old - pc[axis]).abs();
            steps += 1;
            if steps > self.step_budget {
                return Err(Error::StepBudget(self.step_budget));
            }
            if let Some(r) = runs.as_mut() {
                r.last_mut().expect("run").steps.push(code);
            }
            if dw <= wr {
                if let Some(i) = w.index_of(&pos) {
                    if stop_on_return {
                        return Ok(WalkEnd::Returned);
                    }
                    if let Some(v) = visits.as_mut() {
                        v.push(i as u32);
                    }
                }
            }
            if dp >= radius {
                if truncate {
                    return Ok(WalkEnd::Escaped);
                }
                let entry = self.coin(&pos)?;
                let u: f64 = rng.random();
                if u >= entry.h {
                    return Ok(WalkEnd::Escaped);
                }
                if stop_on_return {
                    return Ok(WalkEnd::Returned);
                }
                let y = self.jump(rng, &pos, &entry)?;
                pos.copy_from_slice(w.site(y));
                dw = pos.iter().zip(wa).map(|(a, b)| (a - b).abs()).sum();
                dp = pos.iter().zip(pc).map(|(a, b)| (a - b).abs()).sum();
                if let Some(r) = runs.as_mut() {
                    r.push(Run::new(pos.clone()));
                }
                if let Some(v) = visits.as_mut() {
                    v.push(y as u32);
                }
            }
        }
    }

    fn canonical(&self, z: &[i64]) -> (Vec<i64>, Vec<usize>, Vec<i64>) {
        match &self.center2 {
            None => (z.to_vec(), Vec::new(), Vec::new()),
            Some(c2) => {
                let t: Vec<i64> = z.iter().zip(c2).map(|(x, c)| 2 * x - c).collect();
                let mut perm: Vec<usize> = (0..z.len()).collect();
                perm.sort_by(|&a, &b| t[b].abs().cmp(&t[a].abs()).then(a.cmp(&b)));
                let signs = t.iter().map(|v| if *v < 0 { -1 } else { 1 }).collect();
                let key = perm.iter().map(|&i| t[i].abs()).collect();
                (key, perm, signs)
            }
        }
    }

    fn representative(&self, key: &[i64]) -> Vec<i64> {
        match &self.center2 {
            None => key.to_vec(),
            Some(c2) => key.iter().zip(c2).map(|(t, c)| (t + c) / 2).collect(),
        }
    }

    fn coin(&self, z: &[i64]) -> Result<Arc<CoinEntry>> {
        let (key, _, _) = self.canonical(z);
        if let Some(e) = self.coins.get(key.as_slice()) {
            return Ok(e.clone());
        }
        let profile = self
            .profile
            .as_ref()
            .ok_or_else(|| Error::Precondition("exact escape needs an equilibrium measure".into()))?;
        let rep = self.representative(&key);
        let h = crate::potential::hitting_probability(&self.ev, profile, &rep)?;
        let entry = Arc::new(CoinEntry { h, kernel: OnceLock::new() });
        self.coins.insert(key.into_boxed_slice(), entry.clone());
        Ok(entry)
    }

    fn jump(&self, rng: &mut Stream, z: &[i64], entry: &CoinEntry) -> Result<usize> {
        let (key, perm, signs) = self.canonical(z);
        let kernel = entry.kernel.get_or_init(|| {
            let system = self
                .profile
                .as_ref()
                .and_then(|p| p.system())
                .ok_or_else(|| "exact escape needs the Green system of K".to_string())?;
            let rep = self.representative(&key);
            let h = system.hitting_distribution(&self.ev, &rep).map_err(|e| e.to_string())?;
            WeightedIndex::new(h).map_err(|e| e.to_string())
        });
        let kernel = kernel.as_ref().map_err(|e| Error::Precondition(e.clone()))?;
        let ys = kernel.sample(rng);
        let Some(c2) = &self.center2 else { return Ok(ys) };
        let site = self.window.site(ys);
        let mut t = vec![0i64; site.len()];
        for (j, &i) in perm.iter().enumerate() {
            t[i] = signs[i] * (2 * site[j] - c2[j]);
        }
        let y: Vec<i64> = t.iter().zip(c2).map(|(t, c)| (t + c) / 2).collect();
        self.window
            .index_of(&y)
            .ok_or_else(|| Error::Precondition("hitting kernel left the window".into()))
    }
}

/// Doubled center of the hyperoctahedral symmetry of the window, if it has one
/// that maps every axis onto every other.
fn symmetry_center(w: &Window) -> Option<Vec<i64>> {
    match w.shape() {
        WindowShape::Ball { center, .. } => Some(center.coords().iter().map(|c| 2 * c).collect()),
        WindowShape::Box { corner, side } => Some(corner.coords().iter().map(|c| 2 * c + *side as i64 - 1).collect()),
        WindowShape::Hypercube { offset } => Some(offset.coords().iter().map(|c| 2 * c + 1).collect()),
        _ => None,
    }
}

fn coin_rule(profile: &EquilibriumProfile, window: &Window, cfg: &EscapeConfig) -> Result<EscapeRule> {
    if profile.system().is_none() {
        return Err(Error::Precondition("exact escape needs an exactly solved equilibrium measure".into()));
    }
    Ok(EscapeRule::ExactCoin { radius: window.radius() + cfg.coin_margin.max(1) })
}

fn truncate_rule(ev: &GreenEvaluator, prot: &Protection, cfg: &EscapeConfig, slack: i64) -> Result<EscapeRule> {
    let decay = decay_bound(ev.dim())?;
    let cert = certify_escape_radius(ev, &decay, prot, cfg.tau_ret, prot.radius + slack)?;
    Ok(EscapeRule::Truncate { center: prot.center.coords().to_vec(), radius: cert.radius, bound: cert.bound })
}

fn decay_bound(d: usize) -> Result<Arc<DecayBound>> {
    static CACHE: OnceLock<DashMap<usize, Arc<DecayBound>>> = OnceLock::new();
    let cache = CACHE.get_or_init(DashMap::new);
    if let Some(b) = cache.get(&d) {
        return Ok(b.clone());
    }
    let b = Arc::new(DecayBound::new(d, 3000)?);
    cache.insert(d, b.clone());
    Ok(b)
}
