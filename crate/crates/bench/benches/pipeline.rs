use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spt_bench::unitary_spec;
use spt_core::interaction::tune_unitarity;
use spt_core::Pipeline;

fn single_n(c: &mut Criterion) {
    let mut g = c.benchmark_group("energy");
    for n in [6usize, 20, 30] {
        let spec = unitary_spec(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, spec| {
            b.iter(|| Pipeline::new().run(black_box(spec)).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let template = unitary_spec(6);
    let ns: Vec<usize> = (6..=30).collect();
    c.bench_function("sweep 6..30", |b| {
        b.iter(|| Pipeline::new().sweep(black_box(&template), &ns).unwrap())
    });
}

fn tune(c: &mut Criterion) {
    c.bench_function("tune unitarity", |b| {
        b.iter(|| tune_unitarity(black_box(0.01)).unwrap())
    });
}

criterion_group!(benches, single_n, sweep, tune);
criterion_main!(benches);
