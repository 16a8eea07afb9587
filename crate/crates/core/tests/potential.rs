use std::sync::Arc;

use interlace_core::green::GreenEvaluator;
use interlace_core::lattice::{LatticePoint, Window};
use interlace_core::potential::{equilibrium_exact, hitting_probability};
use proptest::prelude::*;

fn cap(ev: &GreenEvaluator, w: Window) -> f64 {
    equilibrium_exact(ev, Arc::new(w)).unwrap().capacity()
}

#[test]
fn singleton_capacity_is_inverse_g0() {
    for d in [3, 5, 9] {
        let ev = GreenEvaluator::new(d).unwrap();
        let c = cap(&ev, Window::ball(LatticePoint::origin(d), 0).unwrap());
        assert!((c * ev.g0().unwrap() - 1.0).abs() < 1e-10, "d = {d}");
    }
}

#[test]
fn capacity_grows_with_the_set() {
    let ev = GreenEvaluator::new(3).unwrap();
    let o = || LatticePoint::origin(3);
    let balls: Vec<f64> = (0..4).map(|r| cap(&ev, Window::ball(o(), r).unwrap())).collect();
    let boxes: Vec<f64> = (1..6).map(|s| cap(&ev, Window::cube_box(o(), s).unwrap())).collect();
    assert!(balls.windows(2).all(|p| p[0] < p[1]), "{balls:?}");
    assert!(boxes.windows(2).all(|p| p[0] < p[1]), "{boxes:?}");
    for d in [3, 5] {
        let ev = GreenEvaluator::new(d).unwrap();
        assert!(cap(&ev, Window::hypercube(d).unwrap()) < cap(&ev, Window::hypercube_union(d).unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn capacity_is_translation_invariant(d in 3usize..=5, shift in prop::collection::vec(-40i64..40, 5)) {
        let ev = GreenEvaluator::new(d).unwrap();
        let off = LatticePoint::new(shift[..d].to_vec());
        let a = cap(&ev, Window::hypercube(d).unwrap());
        let b = cap(&ev, Window::hypercube_at(off.clone()).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a);
        let pts: Vec<LatticePoint> = Window::ball(LatticePoint::origin(d), 1).unwrap().points().map(|p| p.add(&off)).collect();
        let c = cap(&ev, Window::explicit(d, pts).unwrap());
        let e = cap(&ev, Window::ball(LatticePoint::origin(d), 1).unwrap());
        prop_assert!((c - e).abs() <= 1e-10 * e);
    }

    #[test]
    fn hitting_probability_is_one_on_the_set(d in 3usize..=6, i in any::<prop::sample::Index>()) {
        let ev = GreenEvaluator::new(d).unwrap();
        let w = Arc::new(Window::hypercube(d).unwrap());
        let p = equilibrium_exact(&ev, w.clone()).unwrap();
        let x = w.site(i.index(w.len())).to_vec();
        prop_assert!((hitting_probability(&ev, &p, &x).unwrap() - 1.0).abs() < 1e-9);
        let far: Vec<i64> = (0..d as i64).map(|k| 5 + k).collect();
        let h = hitting_probability(&ev, &p, &far).unwrap();
        prop_assert!(h > 0.0 && h < 1.0);
    }
}
