use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lightcone_core::blaschke::PAIR_ORDER;
use lightcone_core::{catalog_chart, frame_at_order, Jet2};

fn jet_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_product");
    for order in [4, 6, 8] {
        let a = Jet2::from_fn(order, |i, j| 1.0 / (1 + i + 2 * j) as f64);
        let b = Jet2::from_fn(order, |i, j| (i as f64 - j as f64).sin());
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |bench, _| {
            bench.iter(|| black_box(&a) * black_box(&b))
        });
    }
    group.finish();
}

fn jet_composition(c: &mut Criterion) {
    let x = Jet2::linear(0.3, 1.0, 0.5, 6);
    c.bench_function("jet_sin_sqrt_order6", |bench| {
        bench.iter(|| black_box(&x).sin() * black_box(&x).add_scalar(2.0).sqrt().unwrap())
    });
}

fn frames(c: &mut Criterion) {
    let mut group = c.benchmark_group("frame_at");
    group.sample_size(30);
    for name in ["cylinder_r31", "nullsum_minimal_r31", "clifford_s31"] {
        let chart = catalog_chart(name).unwrap();
        for order in [6, PAIR_ORDER] {
            group.bench_with_input(BenchmarkId::new(name, order), &order, |bench, &order| {
                bench.iter(|| frame_at_order(&chart, black_box(0.1), black_box(-0.2), order).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, jet_product, jet_composition, frames);
criterion_main!(benches);
