use std::hint::black_box;

use cohrank::{
    apply_transfer, decompose_fock_product, fock_amplitude, haar_random_transfer, transition_amplitude,
    FockOutcome,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose_fock_product");
    for k in [2usize, 4, 6] {
        let ns = vec![1; k];
        group.bench_with_input(BenchmarkId::from_parameter(k), &ns, |b, ns| {
            b.iter(|| decompose_fock_product(black_box(ns), 0.1).unwrap())
        });
    }
    group.finish();
}

fn transfer(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_transfer");
    for m in [4usize, 8, 16] {
        let mut ns = vec![0; m];
        ns[..4].fill(1);
        let psi = decompose_fock_product(&ns, 0.1).unwrap();
        let u = haar_random_transfer(m, 7).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &(psi, u), |b, (psi, u)| {
            b.iter(|| apply_transfer(black_box(psi), u).unwrap())
        });
    }
    group.finish();
}

fn amplitudes(c: &mut Criterion) {
    let m = 6;
    let input = FockOutcome::new(vec![1; m]);
    let u = haar_random_transfer(m, 3).unwrap();
    let psi = apply_transfer(&decompose_fock_product(&input.counts, 0.1).unwrap(), &u).unwrap();
    let out = FockOutcome::new(vec![2, 0, 1, 1, 0, 2]);
    c.bench_function("fock_amplitude/6x1", |b| b.iter(|| fock_amplitude(black_box(&psi), &out).unwrap()));
    c.bench_function("transition_amplitude/6x1", |b| {
        b.iter(|| transition_amplitude(black_box(&input), &u, &out, 1e-3).unwrap())
    });
}

criterion_group!(benches, decompose, transfer, amplitudes);
criterion_main!(benches);
