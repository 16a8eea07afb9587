mod common;

use interlace_core::green::GreenEvaluator;

#[test]
fn quadrature_matches_series_d3() {
    let ev = GreenEvaluator::new(3).unwrap();
    for x in [[0i64, 0, 0], [1, 0, 0], [1, 1, 0], [2, 1, 0], [1, 1, 1], [3, 0, 0]] {
        let a = ev.green(&x).unwrap();
        let b = common::series::green_series(&x, 500, 5);
        assert!((a - b).abs() < 1e-8, "{x:?}: {a} vs {b}");
    }
}
