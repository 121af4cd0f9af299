use cdk_bench::{pair_measure, rng};
use cdk_core::branching::{best_split, find_branching_pairs, DEFAULT_SPLIT_CAP};
use cdk_core::instances::{geodesic_instance, GeodesicFamily};
use cdk_core::ot::optimal_vertices;
use cdk_core::{certify_strong_cd, lift_plan, solve_w2, LiftStrategy, Log2DemoConfig, Norm, StrongCdOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn splits(c: &mut Criterion) {
    let mut g = c.benchmark_group("best_split");
    for n in [6, 10, 14] {
        let pairs = pair_measure(n, n as u64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pairs, |b, pairs| {
            b.iter(|| black_box(best_split(n, pairs, DEFAULT_SPLIT_CAP).unwrap().value))
        });
    }
    g.finish();
}

fn certification(c: &mut Criterion) {
    let mut r = rng(5);
    let inst = geodesic_instance(&mut r, GeodesicFamily::Grid(Norm::Inf), 2, 6).unwrap();
    let opts = StrongCdOptions { samples: 100, ..Default::default() };
    c.bench_function("optimal_vertices", |b| {
        b.iter(|| black_box(optimal_vertices(&inst.space, &inst.mu0, &inst.mu1, 1000, 1e-9).unwrap().vertices.len()))
    });
    c.bench_function("certify_strong_cd", |b| {
        b.iter(|| black_box(certify_strong_cd(&inst.space, &inst.mu0, &inst.mu1, 0.0, 2, &opts).unwrap().worst_slack))
    });
    let plan = solve_w2(&inst.space, &inst.mu0, &inst.mu1).unwrap().plan;
    let lifted = lift_plan(&inst.space, &plan, 2, LiftStrategy::Uniform).unwrap();
    c.bench_function("branch_scan", |b| b.iter(|| black_box(find_branching_pairs(&lifted).pairs.len())));
}

fn log2_demo(c: &mut Criterion) {
    let cfg = Log2DemoConfig::default();
    c.bench_function("log2_demo", |b| b.iter(|| black_box(cdk_core::log2_drop_experiment(&cfg).unwrap().report.drop)));
}

criterion_group!(benches, splits, certification, log2_demo);
criterion_main!(benches);
