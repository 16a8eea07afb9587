use criterion::{criterion_group, criterion_main, Criterion};
use interlace_core::{GreenEvaluator, Window};

fn green(c: &mut Criterion) {
    c.bench_function("g(1,1,0) d=3 uncached", |b| {
        b.iter(|| GreenEvaluator::new(3).unwrap().green(&[1, 1, 0]).unwrap())
    });
    c.bench_function("g0 d=20 uncached", |b| b.iter(|| GreenEvaluator::new(20).unwrap().g0().unwrap()));
    let w = Window::hypercube(8).unwrap();
    c.bench_function("green matrix hypercube d=8", |b| {
        b.iter(|| GreenEvaluator::new(8).unwrap().green_matrix(&w).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = green
}
criterion_main!(benches);
