//! Throughput of the batch estimators, sequential vs data-parallel.
//!
//! With the default `parallel` feature the same public entry points run
//! under rayon pools of one thread and of the machine's full width, so the
//! comparison reflects exactly what the library dispatches in production.
//! Built with `--no-default-features` the harness benches the sequential
//! fallback alone.

use criterion::{criterion_group, criterion_main, Criterion};
use std::collections::BTreeMap;

use rbaudit_core::attacks::{attack_distances, AttackConfig, AttackMethod, CwConfig};
use rbaudit_core::data::Dataset;
use rbaudit_core::geometry::exact_distance_table;
use rbaudit_core::models::{AffineClassifier, Layer, MlpClassifier};
use rbaudit_core::sampling::{stream_rng, NormalSource};
use rbaudit_core::smoothing::{smoothing_distances, SmoothingConfig};

fn random_dataset(n: usize, d: usize, k: usize, seed: u64) -> Dataset {
    let mut normals = NormalSource::new(stream_rng(seed, 0));
    let mut features = vec![0.0; n * d];
    normals.fill(&mut features);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    Dataset::new(
        n,
        d,
        features,
        labels,
        (0..k).map(|c| format!("c{c}")).collect(),
        BTreeMap::new(),
        (0..d).map(|j| format!("x{j}")).collect(),
    )
    .unwrap()
}

fn random_mlp(d: usize, hidden: usize, k: usize, seed: u64) -> MlpClassifier {
    let mut normals = NormalSource::new(stream_rng(seed, 1));
    let mut layer = |fan_in: usize, fan_out: usize| {
        let scale = 1.0 / (fan_in as f64).sqrt();
        Layer {
            fan_in,
            fan_out,
            weights: (0..fan_in * fan_out)
                .map(|_| scale * normals.sample())
                .collect(),
            biases: (0..fan_out).map(|_| scale * normals.sample()).collect(),
        }
    };
    MlpClassifier::new(vec![layer(d, hidden), layer(hidden, k)]).unwrap()
}

fn random_affine(d: usize, k: usize, seed: u64) -> AffineClassifier {
    let mut normals = NormalSource::new(stream_rng(seed, 2));
    AffineClassifier::from_rows(
        (0..k)
            .map(|_| (0..d).map(|_| normals.sample()).collect())
            .collect(),
        (0..k).map(|_| normals.sample()).collect(),
    )
    .unwrap()
}

#[cfg(feature = "parallel")]
fn with_threads<T>(threads: usize, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("pool")
        .install(f)
}

fn bench_deepfool(c: &mut Criterion) {
    let d = 16;
    let model = random_mlp(d, 24, 3, 7);
    let ds = random_dataset(128, d, 3, 7);
    let cfg = AttackConfig::default();
    let mut group = c.benchmark_group("deepfool_batch_mlp");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("sequential", |b| {
            b.iter(|| {
                with_threads(1, || {
                    attack_distances(&model, &ds, AttackMethod::DeepFool, &cfg).unwrap()
                })
            })
        });
        group.bench_function("parallel", |b| {
            b.iter(|| attack_distances(&model, &ds, AttackMethod::DeepFool, &cfg).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential_fallback", |b| {
        b.iter(|| attack_distances(&model, &ds, AttackMethod::DeepFool, &cfg).unwrap())
    });
    group.finish();
}

fn bench_cw(c: &mut Criterion) {
    let d = 8;
    let model = random_affine(d, 4, 11);
    let ds = random_dataset(32, d, 4, 11);
    let cfg = AttackConfig {
        cw: CwConfig {
            inner_iterations: 200,
            binary_search_steps: 5,
            ..CwConfig::default()
        },
        ..AttackConfig::default()
    };
    let mut group = c.benchmark_group("cw_batch_affine");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("sequential", |b| {
            b.iter(|| {
                with_threads(1, || {
                    attack_distances(&model, &ds, AttackMethod::Cw, &cfg).unwrap()
                })
            })
        });
        group.bench_function("parallel", |b| {
            b.iter(|| attack_distances(&model, &ds, AttackMethod::Cw, &cfg).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential_fallback", |b| {
        b.iter(|| attack_distances(&model, &ds, AttackMethod::Cw, &cfg).unwrap())
    });
    group.finish();
}

fn bench_certify(c: &mut Criterion) {
    let d = 16;
    let model = random_affine(d, 3, 13);
    let ds = random_dataset(64, d, 3, 13);
    let cfg = SmoothingConfig {
        sigma_noise: 0.5,
        n0: 20,
        n: 200,
        alpha: 0.01,
        seed: 13,
    };
    let mut group = c.benchmark_group("certify_batch_affine");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("sequential", |b| {
            b.iter(|| with_threads(1, || smoothing_distances(&model, &ds, &cfg).unwrap()))
        });
        group.bench_function("parallel", |b| {
            b.iter(|| smoothing_distances(&model, &ds, &cfg).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential_fallback", |b| {
        b.iter(|| smoothing_distances(&model, &ds, &cfg).unwrap())
    });
    group.finish();
}

fn bench_exact(c: &mut Criterion) {
    let d = 16;
    let model = random_affine(d, 5, 17);
    let ds = random_dataset(4096, d, 5, 17);
    let mut group = c.benchmark_group("exact_table_affine");
    group.sample_size(20);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("sequential", |b| {
            b.iter(|| with_threads(1, || exact_distance_table(&model, &ds).unwrap()))
        });
        group.bench_function("parallel", |b| {
            b.iter(|| exact_distance_table(&model, &ds).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential_fallback", |b| {
        b.iter(|| exact_distance_table(&model, &ds).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_deepfool, bench_cw, bench_certify, bench_exact);
criterion_main!(benches);
