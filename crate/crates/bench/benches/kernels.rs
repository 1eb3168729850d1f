use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use embedprobe::metrics::trajectory_smoothness;
use embedprobe::numerics::{auc_roc, logistic_fit, pca, pearson, ridge_fit, LogisticOptions};
use embedprobe_bench::{gaussian_matrix, gaussian_vec, noisy_labels};

fn stats(c: &mut Criterion) {
    let a = gaussian_vec(1000, 1);
    let b = gaussian_vec(1000, 2);
    c.bench_function("pearson/1000", |bch| bch.iter(|| pearson(black_box(&a), black_box(&b)).unwrap()));

    let scores = gaussian_vec(10_000, 3);
    let labels: Vec<bool> = gaussian_vec(10_000, 4).iter().map(|v| *v > 0.0).collect();
    c.bench_function("auc_roc/10000", |bch| bch.iter(|| auc_roc(black_box(&scores), black_box(&labels)).unwrap()));
}

fn fits(c: &mut Criterion) {
    let mut g = c.benchmark_group("fits");
    for dims in [1usize, 16, 64] {
        let x = gaussian_matrix(4000, dims, 5);
        let y = gaussian_vec(4000, 6);
        g.bench_with_input(BenchmarkId::new("ridge", dims), &dims, |bch, _| {
            bch.iter(|| ridge_fit(black_box(&x), black_box(&y), 1e-8).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("pca", dims), &dims, |bch, _| bch.iter(|| pca(black_box(&x)).unwrap()));
    }
    for cols in [50usize, 400] {
        let x = gaussian_matrix(400, cols, 7);
        let labels = noisy_labels(&x, 7);
        g.bench_with_input(BenchmarkId::new("logistic", cols), &cols, |bch, _| {
            bch.iter(|| logistic_fit(black_box(&x), black_box(&labels), LogisticOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn smoothness(c: &mut Criterion) {
    let traj = gaussian_matrix(1000, 3, 8);
    let mut g = c.benchmark_group("smoothness");
    g.sample_size(20);
    g.bench_function("1000x3/1000 perms", |bch| bch.iter(|| trajectory_smoothness(black_box(&traj), 1000, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, stats, fits, smoothness);
criterion_main!(benches);
