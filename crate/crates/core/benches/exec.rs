use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fnmat_core::approxdeg::{best_approx_with, RemezConfig};
use fnmat_core::estimators::walk_means;
use fnmat_core::sparsemat::random_sparse_hermitian;
use fnmat_core::{Exec, Parity, QueryCounter, TargetFunction};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn walks(c: &mut Criterion) {
    let a = random_sparse_hermitian(256, 4, 1, true);
    let a = a.scaled(1.0 / a.norm1());
    let mut group = c.benchmark_group("walk_means");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::new(name, 50_000), &exec, |b, &exec| {
            b.iter(|| walk_means(&a, 8, 1, 2, 50_000, 7, exec, &QueryCounter::new()).unwrap())
        });
    }
    group.finish();
}

fn remez(c: &mut Criterion) {
    let f = TargetFunction::from_spec("sin:t=40").unwrap();
    let mut group = c.benchmark_group("remez");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let cfg = RemezConfig { exec, ..RemezConfig::default() };
        group.bench_with_input(BenchmarkId::new(name, 45), &cfg, |b, cfg| {
            b.iter(|| best_approx_with(&f, 45, Parity::Odd, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, walks, remez);
criterion_main!(benches);
