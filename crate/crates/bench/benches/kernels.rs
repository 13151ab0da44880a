use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler_core::causality::grid_distance_field;
use finsler_core::tensor::fundamental_tensor_at;
use finsler_core::zoo::{load_default, load_zoo, params};
use finsler_core::{jet2, optical_metrics, spacetime_geodesic_ivp, GridSpec, OdeOptions};

fn bench_jet2(c: &mut Criterion) {
    let l = load_default("kerr_perturbation").unwrap();
    let z = [0.0, 7.0, 1.2, 0.4];
    let w = [2.0, 0.3, 0.2, 0.1];
    c.bench_function("jet2/kerr_full_jet", |b| b.iter(|| l.full_jet(black_box(&z), black_box(&w)).unwrap()));
    c.bench_function("jet2/polynomial_3", |b| {
        b.iter(|| {
            jet2(|u| Ok(u[0].clone() * u[1].clone() * u[2].clone() + u[0].clone() * u[0].clone()), black_box(&[0.3, -1.2, 2.0]))
                .unwrap()
        })
    });
}

fn bench_tensor(c: &mut Criterion) {
    let mut group = c.benchmark_group("fundamental_tensor");
    for (name, z, w) in [
        ("flat_randers", vec![0.0, 0.1, 0.2], vec![2.0, 0.5, -0.3]),
        ("rutz", vec![0.0, 8.0, 1.2, 0.3], vec![2.0, 0.1, 0.05, 0.04]),
        ("kerr_perturbation", vec![0.0, 7.0, 1.2, 0.4], vec![2.0, 0.3, 0.2, 0.1]),
    ] {
        let l = load_default(name).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &(z, w), |b, (z, w)| {
            b.iter(|| fundamental_tensor_at(&l, black_box(z), black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn bench_geodesic(c: &mut Criterion) {
    let l = load_zoo("kerr_perturbation", &params(&[("equatorial", 1.0)])).unwrap();
    let pair = optical_metrics(&l).unwrap();
    let v = [1.0, 0.1];
    let tau = pair.f_b.at(&[6.0, 0.0], &v).unwrap();
    let w0 = [tau, v[0], v[1]];
    let opts = OdeOptions::default();
    c.bench_function("geodesic/kerr_equatorial_s1", |b| {
        b.iter(|| spacetime_geodesic_ivp(&l, black_box(&[0.0, 6.0, 0.0]), black_box(&w0), 1.0, &[], &opts).unwrap())
    });
}

fn bench_dijkstra(c: &mut Criterion) {
    let f_b = optical_metrics(&load_default("flat_randers").unwrap()).unwrap().f_b;
    let mut group = c.benchmark_group("dijkstra");
    group.sample_size(10);
    for (res, order2) in [(101, false), (101, true), (201, false)] {
        let grid = GridSpec::new(vec![(-1.0, 1.0), (-1.0, 1.0)], res).with_order2(order2);
        let id = format!("{res}x{res}{}", if order2 { "_order2" } else { "" });
        group.bench_function(id, |b| b.iter(|| grid_distance_field(&f_b, black_box(&[0.0, 0.0]), &grid, false).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_jet2, bench_tensor, bench_geodesic, bench_dijkstra);
criterion_main!(benches);
