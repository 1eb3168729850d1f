use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use embedprobe::embed::{embed_dataset, read_embedding_set, write_embedding_set};
use embedprobe::metrics::{
    feature_decoding, feature_entanglement, reconstruction_assessment, run_all, scenario_similarity, temporal_dynamics,
};
use embedprobe::{EmbedderSpec, MetricsConfig};
use embedprobe_bench::canonical_dataset;

fn projection() -> EmbedderSpec {
    EmbedderSpec::RandomProjection { window: 16, dims: 64, seed: 1 }
}

fn stages(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("generate+canonicalize", |b| b.iter(|| canonical_dataset(black_box(5), 1)));

    let ds = canonical_dataset(5, 1);
    g.bench_function("embed/random_projection d=64", |b| b.iter(|| embed_dataset(black_box(&ds), &projection()).unwrap()));

    let emb = embed_dataset(&ds, &projection()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    g.bench_function("interchange write", |b| b.iter(|| write_embedding_set(black_box(&emb), dir.path()).unwrap()));
    g.bench_function("interchange read", |b| b.iter(|| read_embedding_set(black_box(dir.path())).unwrap()));

    let cfg = MetricsConfig::default();
    g.bench_function("entanglement", |b| b.iter(|| feature_entanglement(&ds, &emb, &cfg).unwrap()));
    g.bench_function("reconstruction", |b| b.iter(|| reconstruction_assessment(&ds, &emb, &cfg, 1).unwrap()));
    g.bench_function("dynamics", |b| b.iter(|| temporal_dynamics(&ds, &emb, &cfg, 1).unwrap()));
    g.bench_function("scenarios", |b| b.iter(|| scenario_similarity(&ds, &emb, &cfg).unwrap()));
    g.bench_function("decoding", |b| b.iter(|| feature_decoding(&ds, &emb, &cfg, 1).unwrap()));
    g.bench_function("run_all", |b| b.iter(|| run_all(&ds, &emb, &cfg, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
