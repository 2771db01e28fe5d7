use std::hint::black_box;

use cad_bench::{noisy_blocks, pvalues, tree, trials};
use cad_core::interval::localize;
use cad_core::procedures::{holm, CadProcedure, PValueMap};
use cad_core::sim::{brute_force_eq2, simulate, Procedure, SimConfig};
use cad_core::wavelet::{denoise, haar_forward, SigmaMode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_cad(c: &mut Criterion) {
    let mut g = c.benchmark_group("cad_run");
    for depth in [4, 8, 12] {
        let (t, a) = tree(2, depth, 0.05);
        let p = pvalues(t.len(), 0.5);
        let proc_ = CadProcedure::new(&t, &a).unwrap();
        let map = PValueMap::from_vec(p.clone()).unwrap();
        g.bench_with_input(BenchmarkId::new("sets", t.len()), &map, |b, m| {
            b.iter(|| proc_.run(black_box(m)).unwrap())
        });
        let mut flags = vec![false; t.len()];
        g.bench_with_input(BenchmarkId::new("dense", t.len()), &p, |b, p| {
            b.iter(|| proc_.run_dense(black_box(p), &mut flags))
        });
    }
    g.finish();
}

fn bench_holm(c: &mut Criterion) {
    let p = pvalues(4096, 0.1);
    c.bench_function("holm_4096", |b| {
        b.iter(|| holm(black_box(&p), 0.05).unwrap())
    });
}

fn bench_wavelet(c: &mut Criterion) {
    let mut g = c.benchmark_group("wavelet");
    for n in [1 << 10, 1 << 14] {
        let x = noisy_blocks(n, 1.0);
        g.bench_with_input(BenchmarkId::new("haar_forward", n), &x, |b, x| {
            b.iter(|| haar_forward(black_box(x)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("denoise", n), &x, |b, x| {
            b.iter(|| denoise(black_box(x), 0.05, SigmaMode::Estimate).unwrap())
        });
    }
    g.finish();
}

fn bench_localize(c: &mut Criterion) {
    let m = trials(50, 256);
    c.bench_function("localize_50x256_depth5", |b| {
        b.iter(|| localize(black_box(&m), 0.05, 5, 2).unwrap())
    });
}

fn bench_simulate(c: &mut Criterion) {
    let mut cfg = SimConfig::tree(vec![2; 4]);
    cfg.replications = Some(10_000);
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("binary_depth4_10k", |b| {
        b.iter(|| simulate(black_box(&cfg), Procedure::Cad).unwrap())
    });
    g.finish();
}

fn bench_brute_force(c: &mut Criterion) {
    let mut g = c.benchmark_group("brute_force");
    g.sample_size(10);
    g.bench_function("depth3_binary", |b| {
        b.iter(|| brute_force_eq2(3, &[2], 0.05, 10, 1).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_cad,
    bench_holm,
    bench_wavelet,
    bench_localize,
    bench_simulate,
    bench_brute_force
);
criterion_main!(benches);
