use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgprov_bench::random_polynomial;
use kgprov_core::EdgeId;
use std::hint::black_box;

fn polynomial_ops(c: &mut Criterion) {
    let mut g = c.benchmark_group("polynomial");
    for terms in [4, 32, 256] {
        let a = random_polynomial(1, terms, 5, 400);
        let b = random_polynomial(2, terms, 5, 400);
        g.bench_with_input(BenchmarkId::new("add", terms), &terms, |bench, _| {
            bench.iter(|| black_box(&a).add(black_box(&b)))
        });
        g.bench_with_input(BenchmarkId::new("prune", terms), &terms, |bench, _| {
            bench.iter(|| black_box(&a).prune(EdgeId(7)))
        });
        g.bench_with_input(
            BenchmarkId::new("evaluate_under_deletion", terms),
            &terms,
            |bench, _| bench.iter(|| black_box(&a).evaluate_under_deletion(EdgeId(7))),
        );
    }
    for terms in [4, 32] {
        let a = random_polynomial(3, terms, 3, 400);
        let b = random_polynomial(4, terms, 3, 400);
        g.bench_with_input(BenchmarkId::new("mul", terms), &terms, |bench, _| {
            bench.iter(|| black_box(&a).mul(black_box(&b)))
        });
    }
    g.finish();
}

criterion_group!(benches, polynomial_ops);
criterion_main!(benches);
