mod common;

use common::*;
use embedprobe::embed::{embed_dataset, EmbedderSpec, EmbeddingSet};
use embedprobe::metrics::{run_all, Matrix, MetricsConfig, MetricsSuite};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn matrices_close(a: &Matrix, b: &Matrix) -> bool {
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| match (x, y) {
        (Some(x), Some(y)) => close(*x, *y),
        (None, None) => true,
        _ => false,
    })
}

fn assert_identity_equivalent(s: &MetricsSuite) {
    assert!(close(s.entanglement.grand_mean.raw, s.entanglement.grand_mean.embedded));
    for sc in &s.entanglement.scenarios {
        assert!(matrices_close(&sc.matrices.raw, &sc.matrices.embedded));
    }
    assert!(matrices_close(&s.reconstruction.test_r2.raw, &s.reconstruction.test_r2.embedded));
    for e in &s.dynamics.entries {
        assert_eq!(e.dimensionality.raw, e.dimensionality.embedded);
        assert!(close(e.smoothness.raw, e.smoothness.embedded));
    }
    assert!(matrices_close(&s.scenarios.cosine.raw, &s.scenarios.cosine.embedded));
    assert_eq!(s.scenarios.dimensionality.raw, s.scenarios.dimensionality.embedded);
    assert!(matrices_close(&s.decoding.auc.raw, &s.decoding.auc.embedded));
    assert!(close(s.decoding.mean.raw, s.decoding.mean.embedded));
}

#[test]
fn identity_embeddings_reproduce_raw_metrics() {
    for seed in [0, 1] {
        let ds = generated(seed);
        let emb = embed_dataset(&ds, &EmbedderSpec::Identity).unwrap();
        let s = run_all(&ds, &emb, &MetricsConfig::default(), seed).unwrap();
        assert_identity_equivalent(&s);
        for i in 0..7 {
            assert!(s.reconstruction.test_r2.embedded[i][i].unwrap() >= 1.0 - 1e-9);
        }
    }
}

#[test]
fn identity_equivalence_holds_per_patient() {
    let ds = white_noise(2, 2, 300);
    let cfg = MetricsConfig { per_patient: true, n_perm: 50, window: 30, ..Default::default() };
    let s = run_all(&ds, &EmbeddingSet::identity_of(&ds), &cfg, 9).unwrap();
    assert_identity_equivalent(&s);
}

#[test]
fn metric_runs_are_byte_identical() {
    let ds = generated(3);
    let spec = EmbedderSpec::RandomProjection { window: 4, dims: 8, seed: 1 };
    let emb = embed_dataset(&ds, &spec).unwrap();
    let cfg = MetricsConfig { n_perm: 100, ..Default::default() };
    let a = serde_json::to_vec(&run_all(&ds, &emb, &cfg, 4).unwrap()).unwrap();
    let b = serde_json::to_vec(&run_all(&ds, &emb, &cfg, 4).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_results() {
    let ds = generated(4);
    let emb = embed_dataset(&ds, &EmbedderSpec::Delay { window: 3 }).unwrap();
    let cfg = MetricsConfig { n_perm: 100, ..Default::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_vec(&run_all(&ds, &emb, &cfg, 1).unwrap()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn random_projection_is_reproducible_across_datasets() {
    let ds = generated(5);
    let spec = EmbedderSpec::RandomProjection { window: 5, dims: 6, seed: 77 };
    assert_eq!(embed_dataset(&ds, &spec).unwrap(), embed_dataset(&ds, &spec).unwrap());
}

#[test]
fn shuffler_preserves_column_statistics() {
    let ds = white_noise(6, 1, 200);
    let base = EmbedderSpec::Delay { window: 4 };
    let a = embed_dataset(&ds, &base).unwrap();
    let b = embed_dataset(&ds, &EmbedderSpec::Shuffler { base: Box::new(base), seed: 2 }).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        for d in 0..x.cols() {
            let mut u = x.column(d).to_vec();
            let mut v = y.column(d).to_vec();
            u.sort_by(f64::total_cmp);
            v.sort_by(f64::total_cmp);
            assert_eq!(u, v);
        }
    }
}
