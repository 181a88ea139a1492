use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mupir_core::audit::{check_session, demand_distribution_oracle};
use mupir_core::decode::answer_bundle;
use mupir_core::mupir::{self, BasePolicy};
use mupir_core::{build_file_store, pir, DemandVector, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CASES: [(usize, usize, &[u32]); 4] = [
    (3, 3, &[2, 1, 3]),
    (3, 3, &[2, 3, 2, 1, 3]),
    (4, 3, &[1, 2, 3, 1, 2, 3]),
    (2, 4, &[1, 2, 3, 4, 1, 2]),
];

fn label(s: usize, n: usize, k: usize) -> String {
    format!("S{s}N{n}K{k}")
}

fn generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate");
    for (s, n, theta) in CASES {
        let demand = DemandVector::new(theta.to_vec(), n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(label(s, n, theta.len())), &demand, |b, d| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            b.iter(|| mupir::new_session(s, n, d, BasePolicy::LowestIndex, 1, &mut rng).unwrap());
        });
    }
    g.bench_function("alg1_S4N3", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| pir::new_session(4, 3, 1, 1, &mut rng).unwrap());
    });
    g.finish();
}

fn answer_and_decode(c: &mut Criterion) {
    let mut g = c.benchmark_group("decode");
    for (s, n, theta) in CASES {
        let k = theta.len();
        let demand = DemandVector::new(theta.to_vec(), n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (bundle, tr) = mupir::new_session(s, n, &demand, BasePolicy::LowestIndex, 2, &mut rng).unwrap();
        let store = build_file_store(n, k, s, 1024, 2).unwrap();
        let (_, caches) = mupir::placement(&store, tr.user_perm.as_ref().unwrap()).unwrap();
        let answers = answer_bundle(&store, &bundle).unwrap();
        g.bench_function(BenchmarkId::new("answer", label(s, n, k)), |b| {
            b.iter(|| answer_bundle(black_box(&store), black_box(&bundle)).unwrap())
        });
        g.bench_function(BenchmarkId::new("decode_all", label(s, n, k)), |b| {
            b.iter(|| mupir::decode_all(black_box(&answers), &bundle, &tr, &caches).unwrap())
        });
        g.bench_function(BenchmarkId::new("audit", label(s, n, k)), |b| {
            b.iter(|| check_session(black_box(&bundle), &tr).unwrap())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("mupir_S2N2K2", |b| {
        b.iter(|| demand_distribution_oracle(2, 2, 2, Scheme::Mupir).unwrap())
    });
    g.bench_function("single_S2N2", |b| {
        b.iter(|| demand_distribution_oracle(2, 2, 1, Scheme::Single).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generation, answer_and_decode, oracle);
criterion_main!(benches);
