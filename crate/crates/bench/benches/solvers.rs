use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jsrcert::cap::{delta_cap, min_samples_finite};
use jsrcert::certifier::{solve_gamma, solve_lambda};
use jsrcert::lift::d_lift_matrix;
use jsrcert::sampling::simulate;
use jsrcert::{ModeSet, SolveOptions};

fn lift(c: &mut Criterion) {
    let a = ModeSet::parrilo().matrices()[0].clone();
    let mut g = c.benchmark_group("d_lift_matrix");
    for d in [2usize, 3, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| b.iter(|| d_lift_matrix(black_box(&a), d)));
    }
    g.finish();
}

fn cap(c: &mut Criterion) {
    c.bench_function("delta_cap n=5", |b| b.iter(|| delta_cap(black_box(0.013), 5)));
    c.bench_function("min_samples_finite", |b| b.iter(|| min_samples_finite(black_box(0.95), 5, 3)));
}

fn sampling(c: &mut Criterion) {
    let modes = ModeSet::parrilo();
    c.bench_function("simulate N=10000", |b| b.iter(|| simulate(&modes, 10_000, 1, black_box(1))));
}

fn certifier(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let modes = ModeSet::parrilo();
    let mut g = c.benchmark_group("solve_gamma");
    g.sample_size(10);
    for (d, n) in [(1usize, 1000usize), (1, 10_000), (2, 1000)] {
        let obs = simulate(&modes, n, 1, 3).unwrap().endpoints();
        g.bench_with_input(BenchmarkId::new(format!("d={d}"), n), &obs, |b, obs| {
            b.iter(|| solve_gamma(obs, d, &opts).unwrap())
        });
    }
    g.finish();
    let obs = simulate(&modes, 10_000, 1, 3).unwrap().endpoints();
    c.bench_function("solve_lambda N=10000", |b| b.iter(|| solve_lambda(black_box(&obs))));
}

criterion_group!(benches, lift, cap, sampling, certifier);
criterion_main!(benches);
