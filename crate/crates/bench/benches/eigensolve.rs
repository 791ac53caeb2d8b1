use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spt_bench::blocks;
use spt_core::spectrum::{full_eigensolve, reduced_eigensolve};

// Reduced 2x2 sector solves against the dense O(N^6) generalized problem.
fn reduced_vs_full(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigensolve");
    g.sample_size(10);
    for n in [6usize, 12, 20, 30] {
        let patterns = blocks(n).patterns;
        g.bench_with_input(BenchmarkId::new("reduced", n), &patterns, |b, p| {
            b.iter(|| reduced_eigensolve(black_box(p)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("full", n), &patterns, |b, p| {
            b.iter(|| full_eigensolve(black_box(p)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, reduced_vs_full);
criterion_main!(benches);
