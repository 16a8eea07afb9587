use interlace_core::tree::{evaluate_tree, Tree};
use proptest::prelude::*;

fn tree_strategy() -> impl Strategy<Value = Tree> {
    (1usize..=4).prop_flat_map(|ell| ((ell + 1)..=(4 * ell + 3), Just(ell))).prop_map(|(d, ell)| Tree::new(d, ell).unwrap())
}

/// Nodes on the path from the root (root excluded) satisfy `keep`.
fn path_all(tree: &Tree, mut node: usize, keep: impl Fn(usize) -> bool) -> bool {
    while let Some(p) = tree.parent(node) {
        if !keep(node) {
            return false;
        }
        node = p;
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generations_have_block_powers(tree in tree_strategy()) {
        let b = tree.block();
        let want: Vec<usize> = (0..=tree.ell() as u32).map(|k| b.pow(k)).collect();
        prop_assert_eq!(tree.generation_sizes(), want);
        prop_assert_eq!(tree.len(), tree.window().len());
        for v in 1..tree.len() {
            let p = tree.parent(v).unwrap();
            let k = tree.generation(v);
            prop_assert_eq!(tree.generation(p) + 1, k);
            let diff = tree.window().point(tree.site(v)).sub(&tree.window().point(tree.site(p)));
            let axis = diff.coords().iter().position(|&c| c == 1).unwrap();
            prop_assert_eq!(diff.norm1(), 1);
            prop_assert!((k - 1) * b <= axis && axis < k * b);
        }
    }

    #[test]
    fn pruning_matches_path_oracle(tree in tree_strategy(), bits in prop::collection::vec((0u32..3, any::<bool>()), 200), eps in 0.05f64..0.9) {
        let n = tree.len();
        let occ: Vec<u32> = (0..n).map(|v| bits[v % bits.len()].0).collect();
        let trace: Vec<bool> = (0..n).map(|v| bits[(v * 7 + 3) % bits.len()].1).collect();
        let d = tree.window().dim();
        let out = evaluate_tree(&tree, &occ, &trace, d, eps, 2.0);
        let mut t0 = vec![0; tree.ell() + 1];
        let mut tp = vec![0; tree.ell() + 1];
        for v in 0..n {
            let g = tree.generation(v);
            if path_all(&tree, v, |x| occ[x] == 0) {
                t0[g] += 1;
            }
            if path_all(&tree, v, |x| occ[x] == 0 && !trace[x]) {
                tp[g] += 1;
            }
        }
        prop_assert_eq!(&out.t0, &t0);
        prop_assert_eq!(&out.t_prime, &tp);
        prop_assert!(out.pruned_avoids_trace);
        prop_assert!(out.t_prime.iter().zip(&out.t0).all(|(a, b)| a <= b));
        prop_assert_eq!(out.survival, out.largest_branch >= 2);
    }
}

#[test]
fn rejects_degenerate_depths() {
    assert!(Tree::new(5, 0).is_err());
    assert!(Tree::new(3, 3).is_err());
}
