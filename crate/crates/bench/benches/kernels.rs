use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use ttman::hessian::{hess_apply, three_products_sparse, weingarten};
use ttman::optim::Problem;
use ttman::tangent::{project_sparse, retract};
use ttman_bench::Fixture;

fn order_scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("hess_apply");
    g.sample_size(10);
    for d in [10, 20, 30] {
        let f = Fixture::new(d, 4, 5, 10_000, d as u64);
        g.bench_with_input(BenchmarkId::from_parameter(d), &f, |b, f| {
            b.iter(|| hess_apply(black_box(&f.v), &f.egrad, &f.ehess_v).unwrap())
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let f = Fixture::new(9, 4, 10, 26_158, 1);
    c.bench_function("project_sparse", |b| b.iter(|| project_sparse(&f.point, black_box(f.residual())).unwrap()));
    c.bench_function("three_products_sparse", |b| {
        b.iter(|| three_products_sparse(black_box(&f.v), f.residual()).unwrap())
    });
    c.bench_function("weingarten", |b| b.iter(|| weingarten(black_box(&f.v), &f.egrad).unwrap()));
    c.bench_function("completion_cost", |b| b.iter(|| f.problem.cost(black_box(&f.point)).unwrap()));
    c.bench_function("retract", |b| b.iter(|| retract(black_box(&f.v), 0.1).unwrap()));
}

criterion_group!(benches, kernels, order_scaling);
criterion_main!(benches);
