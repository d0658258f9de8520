use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gridtop_bench::{chain, feeders, uniform_load};
use gridtop_core::moments::analytic_sigma_eps;
use gridtop_core::powerflow::{
    distflow_solve, lcpf_solve, DistFlowOptions, LinearModel, LinearSweep,
};

fn lcpf(c: &mut Criterion) {
    let mut group = c.benchmark_group("lcpf_solve");
    for n in [100usize, 400, 1600] {
        let (forest, _) = chain(n);
        let inj = uniform_load(n);
        group.bench_with_input(BenchmarkId::new("chain", n), &n, |b, _| {
            b.iter(|| lcpf_solve(&forest, black_box(&inj)).unwrap())
        });
    }
    // Repeated solves reuse the tree ordering; this is the Monte-Carlo inner loop.
    let (forest, _) = feeders(400, 3);
    let sweep = LinearSweep::new(&forest, LinearModel::Lc);
    let inj = uniform_load(400);
    let (mut eps, mut theta) = (vec![0.0; 400], vec![0.0; 400]);
    group.bench_function("sweep/feeders/400", |b| {
        b.iter(|| sweep.solve_into(black_box(&inj.p), &inj.q, &mut eps, Some(&mut theta)))
    });
    group.finish();
}

fn distflow(c: &mut Criterion) {
    let (forest, _) = feeders(83, 5);
    let inj = uniform_load(83);
    c.bench_function("distflow_solve/feeders/83", |b| {
        b.iter(|| distflow_solve(&forest, black_box(&inj), DistFlowOptions::default()).unwrap())
    });
}

fn moments(c: &mut Criterion) {
    let (forest, model) = feeders(83, 5);
    c.bench_function("analytic_sigma_eps/feeders/83", |b| {
        b.iter(|| analytic_sigma_eps(black_box(&forest), &model).unwrap())
    });
}

criterion_group!(benches, lcpf, distflow, moments);
criterion_main!(benches);
