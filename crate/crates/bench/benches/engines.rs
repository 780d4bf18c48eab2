use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use intervene_core::classical::{GaussianMoment, MeasurementModel, SystemContext};
use intervene_core::collision::{evolve, symplectic_of_generators, CovarianceState};
use intervene_core::fock::{parity_feedback, DensityMatrix, FockSpace, MeasurementPair};
use intervene_core::grid::{apply_control, collision_map, discretize};
use intervene_core::montecarlo::run_trials;
use intervene_core::Grid1D;

fn normal(mean: f64, var: f64) -> GaussianMoment {
    GaussianMoment::new(mean, var).unwrap()
}

fn grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("grid");
    for points in [1025, 4097] {
        let grid = Grid1D::symmetric(8.0, points).unwrap();
        let d = discretize(&normal(0.3, 1.0), grid).unwrap();
        g.bench_with_input(BenchmarkId::new("apply_control", points), &d, |b, d| {
            b.iter(|| apply_control(black_box(d), 0.123, 0.05).unwrap())
        });
    }
    g.sample_size(10);
    for points in [255, 511] {
        let grid = Grid1D::symmetric(10.0, points).unwrap();
        let a = discretize(&normal(1.0, 0.5), grid).unwrap();
        let pb = discretize(&normal(-1.0, 0.5), grid).unwrap();
        let eps = discretize(&normal(0.0, 0.25), grid).unwrap();
        g.bench_function(BenchmarkId::new("collision_map", points), |b| {
            b.iter(|| collision_map(black_box(&a), &pb, &eps).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let ctx = SystemContext::default();
    let model = MeasurementModel::new(1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function("run_trials/100000", |b| b.iter(|| run_trials(&ctx, &model, 100_000, black_box(7)).unwrap()));
    g.finish();
}

fn fock(c: &mut Criterion) {
    let mut g = c.benchmark_group("fock");
    g.sample_size(10);
    for dim in [32, 64, 128] {
        let space = FockSpace::new(dim).unwrap();
        let rho = DensityMatrix::thermal(&space, 1.0).unwrap();
        let pair = MeasurementPair::build(&space, 0.1).unwrap();
        g.bench_with_input(BenchmarkId::new("parity_feedback", dim), &rho, |b, rho| {
            b.iter(|| parity_feedback(black_box(rho), &pair).unwrap())
        });
    }
    g.finish();
}

fn covariance(c: &mut Criterion) {
    let (_, _, svu) = symplectic_of_generators();
    let a = CovarianceState::coherent(0.0, 1.0);
    let b = CovarianceState::coherent(0.0, -1.0);
    let input = CovarianceState::collision_input(&a, &b, 0.05).unwrap();
    c.bench_function("covariance/evolve", |bch| bch.iter(|| evolve(black_box(&input), &svu).unwrap()));
}

criterion_group!(benches, grid, monte_carlo, fock, covariance);
criterion_main!(benches);
