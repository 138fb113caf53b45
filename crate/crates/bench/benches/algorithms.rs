//! Benchmarks for the hot paths: PageRank, leading eigenvalue, strongly
//! connected components, and the three layer randomization schemes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use traderisk_core::graph;
use traderisk_core::model::Layer;
use traderisk_core::nullmodels::{self, Scheme};

/// Random layer with `n` nodes and roughly `density * n * (n-1)` links.
fn random_layer(n: usize, density: f64, seed: u64) -> Layer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Layer::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                layer.insert(i, j, rng.random_range(0.01..1.0));
            }
        }
    }
    layer
}

fn bench_pagerank(c: &mut Criterion) {
    let mut group = c.benchmark_group("pagerank");
    for &n in &[50usize, 200, 800] {
        let layer = random_layer(n, 0.1, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &layer, |b, layer| {
            b.iter(|| graph::pagerank(black_box(layer), 0.85, 1e-10, 100_000).unwrap());
        });
    }
    group.finish();
}

fn bench_eigenvalue(c: &mut Criterion) {
    let mut group = c.benchmark_group("leading_eigenvalue");
    for &n in &[50usize, 200, 800] {
        let layer = random_layer(n, 0.1, 11);
        group.bench_with_input(BenchmarkId::from_parameter(n), &layer, |b, layer| {
            b.iter(|| graph::leading_eigenvalue(black_box(layer), 1e-10, 100_000).unwrap());
        });
    }
    group.finish();
}

fn bench_scc(c: &mut Criterion) {
    let mut group = c.benchmark_group("scc_fraction");
    for &n in &[50usize, 200, 800] {
        let layer = random_layer(n, 0.05, 13);
        group.bench_with_input(BenchmarkId::from_parameter(n), &layer, |b, layer| {
            b.iter(|| graph::largest_scc_fraction(black_box(layer)));
        });
    }
    group.finish();
}

fn bench_nullmodels(c: &mut Criterion) {
    let mut group = c.benchmark_group("randomize");
    let layer = random_layer(200, 0.1, 17);
    for scheme in [Scheme::FixDegree, Scheme::FixInDeg, Scheme::FixInOutDeg] {
        group.bench_with_input(
            BenchmarkId::from_parameter(scheme),
            &layer,
            |b, layer| {
                b.iter(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(23);
                    nullmodels::randomize_layer(black_box(layer), scheme, &mut rng).unwrap()
                });
            },
        );
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_pagerank,
    bench_eigenvalue,
    bench_scc,
    bench_nullmodels
);
criterion_main!(benches);
