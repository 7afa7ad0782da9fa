use bagsched::harness::{eptas_solve, SolveConfig};
use bagsched::{global_bag_lpt, rat};
use bagsched_bench::fixture;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for jobs in [6, 10, 14] {
        let inst = fixture(jobs, 1);
        group.bench_with_input(BenchmarkId::new("eptas_half", jobs), &inst, |b, inst| {
            b.iter(|| eptas_solve(black_box(inst), &rat(1, 2), &SolveConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lpt", jobs), &inst, |b, inst| {
            b.iter(|| global_bag_lpt(black_box(inst)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
