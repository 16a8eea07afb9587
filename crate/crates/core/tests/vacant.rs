mod common;

use std::sync::Arc;

use interlace_core::green::GreenEvaluator;
use interlace_core::interlacement::sample_interlacement;
use interlace_core::lattice::{boundary, LatticePoint, SiteSet, Window};
use interlace_core::potential::equilibrium_exact;
use interlace_core::rng::{stream, Tag};
use interlace_core::vacant::{check_g_u, components, find_bridges, validate_bridges, NOT_VACANT};
use interlace_core::walk::{EscapeConfig, WalkSampler};
use proptest::prelude::*;

use common::oracles::{bfs_labels, closure_counts, lookup_neighbours};

fn window_strategy() -> impl Strategy<Value = Arc<Window>> {
    prop_oneof![
        (3usize..=8).prop_map(|d| Arc::new(Window::hypercube(d).unwrap())),
        (3usize..=4, 2u32..=5).prop_map(|(d, s)| Arc::new(Window::cube_box(LatticePoint::origin(d), s).unwrap())),
        (3usize..=4, 1u32..=3).prop_map(|(d, r)| Arc::new(Window::ball(LatticePoint::origin(d), r).unwrap())),
        (3usize..=5).prop_map(|d| Arc::new(Window::hypercube_union(d).unwrap())),
    ]
}

fn set_strategy() -> impl Strategy<Value = SiteSet> {
    (window_strategy(), any::<u64>(), 0.0f64..1.0).prop_map(|(w, seed, p)| {
        let bits: Vec<bool> = {
            use rand::Rng;
            let mut rng = stream(seed, Tag::Oracle, 0);
            (0..w.len()).map(|_| rng.random::<f64>() < p).collect()
        };
        SiteSet::from_indices(w, bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn union_find_matches_bfs(set in set_strategy()) {
        let dec = components(&set, Some(&SiteSet::full(set.universe().clone()))).unwrap();
        let oracle = bfs_labels(&set);
        for (s, l) in oracle.iter().enumerate() {
            prop_assert_eq!(dec.label(s), l.unwrap_or(NOT_VACANT));
        }
        let closure = closure_counts(&set);
        prop_assert_eq!(dec.closure_sizes().unwrap(), closure.as_slice());
        prop_assert_eq!(dec.sizes().iter().sum::<usize>(), set.len());
    }

    #[test]
    fn neighbour_index_matches_lookup(w in window_strategy(), i in any::<prop::sample::Index>()) {
        let i = i.index(w.len());
        let mut scratch = Vec::new();
        let mut fast: Vec<usize> = (0..w.dim())
            .flat_map(|a| [true, false].map(|up| (a, up)))
            .filter_map(|(a, up)| w.neighbor_index(i, a, up, &mut scratch))
            .collect();
        let mut slow = lookup_neighbours(&w, i);
        fast.sort_unstable();
        slow.sort_unstable();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn bridges_are_disjoint_and_valid(set in set_strategy()) {
        let w = set.universe().clone();
        let dec = components(&set, None).unwrap();
        prop_assume!(dec.count() >= 2);
        let a = dec.members(0);
        let b = dec.members(1);
        let m = set.difference(&a.union(&b).unwrap()).unwrap();
        let bridges = find_bridges(&a, &b, &m).unwrap();
        validate_bridges(&a, &b, &m, &bridges).unwrap();
        let mut used = SiteSet::empty(w);
        for br in &bridges {
            for s in br.sites() {
                prop_assert!(!used.contains(s), "site {} in two bridges", s);
                prop_assert!(!a.contains(s) && !b.contains(s) && !m.contains(s));
                used.insert(s);
            }
        }
    }

    #[test]
    fn boundary_partitions_closure(set in set_strategy()) {
        let bd = boundary(&set, None).unwrap();
        prop_assert!(bd.outer.is_disjoint(&set).unwrap());
        prop_assert!(bd.inner.is_subset(&set).unwrap());
        prop_assert_eq!(bd.closure.len(), set.len() + bd.outer.len());
    }
}

#[test]
fn g_u_is_monotone_under_label_filtering() {
    let d = 5;
    let ev = Arc::new(GreenEvaluator::new(d).unwrap());
    let w = Arc::new(Window::hypercube_union(d).unwrap());
    let ws = WalkSampler::new(ev.clone(), Arc::new(equilibrium_exact(&ev, w).unwrap()), &EscapeConfig::default()).unwrap();
    let grid: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let mut held = vec![0; grid.len()];
    for i in 0..60 {
        let s = sample_interlacement(&ws, 3.0, &mut stream(5, Tag::Sample, i)).unwrap();
        let flags: Vec<bool> = grid.iter().map(|&u| check_g_u(&s.at_level(u).unwrap()).unwrap().holds).collect();
        assert!(flags.windows(2).all(|p| p[0] || !p[1]), "G_u regained at a higher level: {flags:?}");
        for (h, f) in held.iter_mut().zip(&flags) {
            *h += usize::from(*f);
        }
    }
    assert_eq!(held[0], 60, "G_0 holds on the full union");
    assert!(held.windows(2).all(|p| p[0] >= p[1]));
}
