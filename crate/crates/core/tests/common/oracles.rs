//! Brute-force reference implementations.

use std::collections::VecDeque;

use interlace_core::lattice::{SiteSet, Window};
use num_bigint::BigUint;

/// Neighbours of site i found by coordinate lookup.
pub fn lookup_neighbours(w: &Window, i: usize) -> Vec<usize> {
    let mut x = w.site(i).to_vec();
    let mut out = Vec::new();
    for a in 0..w.dim() {
        for s in [-1, 1] {
            x[a] += s;
            if let Some(j) = w.index_of(&x) {
                out.push(j);
            }
            x[a] -= s;
        }
    }
    out
}

/// Component labels by breadth-first search from increasing sites; None off the set.
pub fn bfs_labels(set: &SiteSet) -> Vec<Option<u32>> {
    let w = set.universe();
    let mut labels = vec![None; w.len()];
    let mut next = 0;
    for s in 0..w.len() {
        if !set.contains(s) || labels[s].is_some() {
            continue;
        }
        labels[s] = Some(next);
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            for j in lookup_neighbours(w, i) {
                if set.contains(j) && labels[j].is_none() {
                    labels[j] = Some(next);
                    q.push_back(j);
                }
            }
        }
        next += 1;
    }
    labels
}

/// |closure(U)| within the window for each BFS component U.
pub fn closure_counts(set: &SiteSet) -> Vec<usize> {
    let w = set.universe();
    let labels = bfs_labels(set);
    let k = labels.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut counts = vec![0; k];
    for s in 0..w.len() {
        let mut seen: Vec<u32> = labels[s].into_iter().collect();
        for j in lookup_neighbours(w, s) {
            if let Some(l) = labels[j] {
                if !seen.contains(&l) {
                    seen.push(l);
                }
            }
        }
        for l in seen {
            counts[l as usize] += 1;
        }
    }
    counts
}

/// r = floor(x^{1/k}) checked by r^k <= x < (r+1)^k.
pub fn is_floor_root(r: &BigUint, x: &BigUint, k: u32) -> bool {
    r.pow(k) <= *x && (r + 1u32).pow(k) > *x
}
