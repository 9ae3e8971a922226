use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rinewton_bench::{setup, start};
use rinewton_core::solver::{exact_step, iterate, InnerKind, SolverConfig, StepStrategy};

fn exact_newton(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact newton");
    for name in ["exp-minus-one", "rayleigh-3d", "karcher-spd2"] {
        let s = setup(name, 0.0);
        let p0 = start(&s, 0.5);
        let cfg = SolverConfig::exact();
        group.bench_with_input(BenchmarkId::from_parameter(name), &p0, |b, p0| {
            b.iter(|| iterate(&s.problem, black_box(p0), &cfg))
        });
    }
    group.finish();
}

fn step_strategies(c: &mut Criterion) {
    let s = setup("rayleigh-3d", 0.5);
    let p0 = start(&s, 0.9);
    let theta = s.theta_max(s.problem.geometry().distance(s.singularity(), &p0).unwrap()).unwrap();
    let mut group = c.benchmark_group("rayleigh inexact");
    for (label, strategy) in [
        ("adversarial", StepStrategy::Adversarial { seed: 1 }),
        ("cgne", StepStrategy::Truncated { max_inner: 20, inner: InnerKind::Cgne }),
        ("richardson", StepStrategy::Truncated { max_inner: 200, inner: InnerKind::Richardson }),
    ] {
        let cfg = SolverConfig::new(theta, strategy).unwrap();
        group.bench_function(label, |b| b.iter(|| iterate(&s.problem, black_box(&p0), &cfg)));
    }
    group.finish();
}

fn single_step(c: &mut Criterion) {
    let s = setup("karcher-spd2", 0.0);
    let p = start(&s, 0.5);
    c.bench_function("karcher exact step", |b| b.iter(|| exact_step(&s.problem, black_box(&p))));
}

criterion_group!(benches, exact_newton, step_strategies, single_step);
criterion_main!(benches);
