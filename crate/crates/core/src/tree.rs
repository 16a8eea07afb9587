//! The deterministic tree T inside the hypercube, the random subtree T^0 of sites
//! with vanishing occupation number, and its pruning T' by the interlacement trace.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::interlacement::{occupation_numbers, sample_doubly_infinite, InterlacementSample};
use crate::lattice::{LatticePoint, Window};
use crate::levels::{big_l, ell_formula, Levels};
use crate::potential::equilibrium_exact;
use crate::rng::{stream, Tag};
use crate::walk::{EscapeConfig, Protection, WalkSampler};

/// T = {e_{i_1} + ... + e_{i_k}: 0 <= k <= ell, i_j in I_j}, where I_1, ..., I_ell are
/// consecutive blocks of {0, .., d-1} of length [d / ell].
#[derive(Clone, Debug)]
pub struct Tree {
    ell: usize,
    block: usize,
    window: Arc<Window>,
    /// window index of each node, nodes in breadth-first order
    site: Vec<usize>,
    generation: Vec<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(d: usize, ell: usize) -> Result<Self> {
        if ell == 0 || d <= ell {
            return Err(Error::Precondition(format!("tree needs d > ell >= 1, got d = {d}, ell = {ell}")));
        }
        let block = d / ell;
        let mut points = vec![vec![0i64; d]];
        let mut generation = vec![0];
        let mut parent = vec![None];
        let mut children = vec![Vec::new()];
        let mut head = 0;
        while head < points.len() {
            let k = generation[head];
            if k < ell {
                for i in k * block..(k + 1) * block {
                    let mut x = points[head].clone();
                    x[i] = 1;
                    let id = points.len();
                    points.push(x);
                    generation.push(k + 1);
                    parent.push(Some(head));
                    children.push(Vec::new());
                    children[head].push(id);
                }
            }
            head += 1;
        }
        let window = Arc::new(Window::explicit(d, points.iter().cloned().map(LatticePoint::new).collect())?);
        let site = points.iter().map(|x| window.index_of(x).expect("tree node in window")).collect();
        Ok(Tree { ell, block, window, site, generation, parent, children })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site.is_empty()
    }

    pub fn generation(&self, node: usize) -> usize {
        self.generation[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Window index of a node.
    pub fn site(&self, node: usize) -> usize {
        self.site[node]
    }

    /// |T_k| for k = 0..=ell.
    pub fn generation_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.ell + 1];
        for &g in &self.generation {
            out[g] += 1;
        }
        out
    }
}

/// Per-sample view of the tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeOutcome {
    /// |T^0_k|
    pub t0: Vec<usize>,
    /// |T^0_k ∩ I|
    pub t0_in_trace: Vec<usize>,
    /// |T'_k|
    pub t_prime: Vec<usize>,
    /// D(z) >= lower and D(z) <= upper for every z in T of depth < ell
    pub event_d: bool,
    /// |T^0_k ∩ I| < d^{-eps/2} |T^0_k|, k = 1..=ell (index 0 is always true)
    pub thin_trace: Vec<bool>,
    /// |T'_k| >= e^{-1e-3/ell} (d^eps/ell) |T'_{k-1}| - d^{-eps/2} |T^0_k|
    pub one_step: Vec<bool>,
    /// |T'_k| >= e^{-k/(100 ell)} |T^0_k|
    pub pruned_ratio: Vec<bool>,
    /// T' ∩ I ⊆ {0}
    pub pruned_avoids_trace: bool,
    /// largest subtree of T' hanging from a site of T'_1
    pub largest_branch: usize,
    /// largest_branch >= L
    pub survival: bool,
}

impl TreeOutcome {
    /// Event D holds and the trace is thin in every generation.
    pub fn hypotheses_hold(&self) -> bool {
        self.event_d && self.thin_trace.iter().all(|&b| b)
    }
}

/// One tree evaluation from occupation numbers (indexed by node) and the trace on T.
pub fn evaluate_tree(tree: &Tree, occupation: &[u32], in_trace: &[bool], d: usize, epsilon: f64, big_l: f64) -> TreeOutcome {
    let ell = tree.ell();
    let n = tree.len();
    let de = (d as f64).powf(epsilon);
    let centre = de / ell as f64;
    let slack = (1e-3 / ell as f64).exp();
    let (lower, upper) = (centre / slack, centre * slack);
    let thin = (d as f64).powf(-epsilon / 2.0);

    let mut in_t0 = vec![false; n];
    in_t0[0] = true;
    let mut in_prime = vec![false; n];
    in_prime[0] = true;
    let mut event_d = true;
    for node in 0..n {
        let kids = tree.children(node);
        if tree.generation(node) < ell {
            let dz = kids.iter().filter(|&&c| occupation[c] == 0).count() as f64;
            if dz < lower || dz > upper {
                event_d = false;
            }
        }
        for &c in kids {
            in_t0[c] = in_t0[node] && occupation[c] == 0;
            in_prime[c] = in_prime[node] && in_t0[c] && !in_trace[c];
        }
    }

    let mut t0 = vec![0; ell + 1];
    let mut t0_in_trace = vec![0; ell + 1];
    let mut t_prime = vec![0; ell + 1];
    for node in 0..n {
        let g = tree.generation(node);
        if in_t0[node] {
            t0[g] += 1;
            if in_trace[node] {
                t0_in_trace[g] += 1;
            }
        }
        if in_prime[node] {
            t_prime[g] += 1;
        }
    }
    let mut thin_trace = vec![true; ell + 1];
    let mut one_step = vec![true; ell + 1];
    let mut pruned_ratio = vec![true; ell + 1];
    for k in 1..=ell {
        thin_trace[k] = (t0_in_trace[k] as f64) < thin * t0[k] as f64;
        one_step[k] = t_prime[k] as f64 >= centre / slack * t_prime[k - 1] as f64 - thin * t0[k] as f64;
        pruned_ratio[k] = t_prime[k] as f64 >= (-(k as f64) / (100.0 * ell as f64)).exp() * t0[k] as f64;
    }
    let pruned_avoids_trace = (1..n).all(|x| !(in_prime[x] && in_trace[x]));

    let mut branch = vec![0usize; n];
    for node in (0..n).rev() {
        if in_prime[node] {
            branch[node] += 1;
            if let Some(p) = tree.parent(node) {
                branch[p] += branch[node];
            }
        }
    }
    let largest_branch = tree.children(0).iter().map(|&c| branch[c]).max().unwrap_or(0);
    TreeOutcome {
        t0,
        t0_in_trace,
        t_prime,
        event_d,
        thin_trace,
        one_step,
        pruned_ratio,
        pruned_avoids_trace,
        largest_branch,
        survival: largest_branch as f64 >= big_l,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeConfig {
    pub d: usize,
    pub epsilon: f64,
    /// Depth of the tree; defaults to the formula value, which is only usable for d > ell.
    pub ell: Option<u64>,
    /// Level of the interlacement; defaults to (1 - eps) g(0) log d.
    pub u0: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub escape: EscapeConfig,
}

/// Statistics of n_x over the samples for the sites of one generation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationLaw {
    pub k: usize,
    pub observations: usize,
    pub mean_occupation: f64,
    pub var_occupation: f64,
    /// mean n_x / u0, the estimate of nu(W*_x)
    pub nu_hat: f64,
    pub zero_fraction: f64,
    /// mean D(z) over z of depth k - 1: block * zero_fraction
    pub mean_children: f64,
    /// block * exp(-u0 nu_hat)
    pub predicted_children: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeExperimentReport {
    pub d: usize,
    pub epsilon: f64,
    pub u0: f64,
    pub ell: u64,
    /// the depth given by the formula in epsilon, reported next to the one used
    pub ell_formula: u64,
    pub big_l: f64,
    pub alpha: f64,
    pub block: usize,
    pub tree_sizes: Vec<usize>,
    pub n_samples: usize,
    pub samples: Vec<TreeOutcome>,
    pub laws: Vec<GenerationLaw>,
    pub event_d_count: usize,
    pub hypotheses_count: usize,
    /// samples where the hypotheses hold but the one-step bound fails for some k
    pub one_step_violations: usize,
    /// samples where the hypotheses hold but the pruned ratio bound fails for some k
    pub pruned_ratio_violations: usize,
    pub trace_violations: usize,
    pub survival_count: usize,
    /// occupation numbers per sample, indexed by tree node
    #[serde(skip)]
    pub occupations: Vec<Vec<u32>>,
}

/// Samples doubly infinite trajectories through T at level u0, protected by the ball
/// B_1(0, ell) so that paths inside it are complete, and evaluates T^0 and T'.
pub fn tree_experiment(ev: &Arc<GreenEvaluator>, cfg: &TreeConfig) -> Result<TreeExperimentReport> {
    let d = cfg.d;
    if ev.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: ev.dim() });
    }
    let levels = Levels::new(ev, cfg.epsilon)?;
    let ell_f = ell_formula(cfg.epsilon);
    let ell = cfg.ell.unwrap_or(ell_f);
    if ell as usize >= d {
        return Err(Error::Precondition(format!("ell = {ell} must be below d = {d}")));
    }
    let u0 = cfg.u0.unwrap_or(levels.u0);
    let l_big = big_l(d, cfg.epsilon, ell);
    let tree = Tree::new(d, ell as usize)?;
    let window = tree.window().clone();
    let profile = Arc::new(equilibrium_exact(ev, window.clone())?);
    let prot = Protection::ball(ev, LatticePoint::origin(d), ell as i64)?;
    let ws = WalkSampler::protected(ev.clone(), Some(profile), window.clone(), &prot, &cfg.escape)?;
    let targets: Vec<LatticePoint> = (0..tree.len()).map(|v| window.point(tree.site(v))).collect();

    let per_sample: Vec<(TreeOutcome, Vec<u32>)> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, Tag::Sample, i as u64);
            let sample: InterlacementSample = sample_doubly_infinite(&ws, u0, &mut rng)?;
            let occ = occupation_numbers(&sample, &targets)?;
            let trace: Vec<bool> = (0..tree.len()).map(|v| sample.occupied().contains(tree.site(v))).collect();
            Ok((evaluate_tree(&tree, &occ, &trace, d, cfg.epsilon, l_big), occ))
        })
        .collect::<Result<_>>()?;

    let (samples, occupations): (Vec<_>, Vec<_>) = per_sample.into_iter().unzip();
    let laws = generation_laws(&tree, &occupations, u0);
    let hyp: Vec<&TreeOutcome> = samples.iter().filter(|s| s.hypotheses_hold()).collect();
    Ok(TreeExperimentReport {
        d,
        epsilon: cfg.epsilon,
        u0,
        ell,
        ell_formula: ell_f,
        big_l: l_big,
        alpha: levels.alpha,
        block: tree.block(),
        tree_sizes: tree.generation_sizes(),
        n_samples: cfg.n_samples,
        event_d_count: samples.iter().filter(|s| s.event_d).count(),
        hypotheses_count: hyp.len(),
        one_step_violations: hyp.iter().filter(|s| !s.one_step.iter().all(|&b| b)).count(),
        pruned_ratio_violations: hyp.iter().filter(|s| !s.pruned_ratio.iter().all(|&b| b)).count(),
        trace_violations: samples.iter().filter(|s| !s.pruned_avoids_trace).count(),
        survival_count: samples.iter().filter(|s| s.survival).count(),
        samples,
        laws,
        occupations,
    })
}

fn generation_laws(tree: &Tree, occupations: &[Vec<u32>], u0: f64) -> Vec<GenerationLaw> {
    let b = tree.block() as f64;
    (1..=tree.ell())
        .map(|k| {
            let nodes: Vec<usize> = (0..tree.len()).filter(|&v| tree.generation(v) == k).collect();
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut zeros = 0.0;
            let mut n = 0.0;
            for occ in occupations {
                for &v in &nodes {
                    let x = occ[v] as f64;
                    sum += x;
                    sq += x * x;
                    zeros += f64::from(u8::from(occ[v] == 0));
                    n += 1.0;
                }
            }
            let mean = if n > 0.0 { sum / n } else { 0.0 };
            let var = if n > 1.0 { (sq - n * mean * mean) / (n - 1.0) } else { 0.0 };
            let p = if n > 0.0 { zeros / n } else { 1.0 };
            let predicted = (-mean).exp();
            let se = ((p * (1.0 - p) + predicted * predicted * var) / n.max(1.0)).sqrt();
            GenerationLaw {
                k,
                observations: n as usize,
                mean_occupation: mean,
                var_occupation: var,
                nu_hat: if u0 > 0.0 { mean / u0 } else { f64::NAN },
                zero_fraction: p,
                mean_children: b * p,
                predicted_children: b * predicted,
                z_score: if se > 0.0 { (p - predicted) / se } else { 0.0 },
            }
        })
        .collect()
}
