use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wiretap_bench::{degraded, misome, spd, sym};
use wiretap_core::misome::default_alpha_grid;
use wiretap_core::{gen_eigen_max, maximize_weighted_sum, misome_region, Permutation, SearchBudget, WeightedObjective};

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("gen_eigen_max");
    for t in [2, 4, 8, 16] {
        let (a, b) = (sym(t), spd(t, 0.3));
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |bch, _| {
            bch.iter(|| gen_eigen_max(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn weighted_sum(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximize_weighted_sum");
    group.sample_size(10);
    let ch = degraded(2);
    let budget = SearchBudget { restarts: 4, ..Default::default() };
    for mu in [1.0, 2.5, 10.0] {
        let obj = WeightedObjective::from_mu(mu).unwrap();
        group.bench_with_input(BenchmarkId::new("t2", mu), &mu, |bch, _| {
            bch.iter(|| maximize_weighted_sum(black_box(&ch), &obj, &budget).unwrap())
        });
    }
    group.finish();
}

fn misome_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("misome_region");
    let grid = default_alpha_grid();
    let perms = Permutation::all(2);
    for t in [2, 4, 8] {
        let ch = misome(t, 2, 10.0);
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |bch, _| {
            bch.iter(|| misome_region(black_box(&ch), &grid, &perms).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigen, weighted_sum, misome_sweep);
criterion_main!(benches);
