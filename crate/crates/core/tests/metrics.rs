mod common;

use std::f64::consts::PI;

use common::*;
use embedprobe::embed::{embed_dataset, EmbedderSpec, EmbeddingSet};
use embedprobe::metrics::*;
use embedprobe::numerics::auc_roc;
use embedprobe::scenario::{Dataset, FeatureId};

fn cfg() -> MetricsConfig {
    MetricsConfig { n_perm: 200, ..Default::default() }
}

fn identity(ds: &Dataset) -> EmbeddingSet {
    EmbeddingSet::identity_of(ds)
}

fn upper(m: &Matrix) -> Vec<f64> {
    (0..m.len()).flat_map(|i| ((i + 1)..m.len()).filter_map(move |j| m[i][j])).collect()
}

fn assert_well_formed(m: &Matrix, unit_diagonal: bool) {
    for i in 0..m.len() {
        if unit_diagonal {
            assert_eq!(m[i][i], Some(1.0));
        }
        for j in 0..m.len() {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
}

#[test]
fn copied_features_are_fully_entangled() {
    let x = noise(1, "x", 400);
    let ds = Dataset::from_fn(&["s"], 2, 400, |_, _, f| {
        if f.index() < 2 {
            x.clone()
        } else {
            noise(2, f.name(), 400)
        }
    })
    .unwrap();
    let r = feature_entanglement(&ds, &identity(&ds), &cfg()).unwrap();
    let m = &r.scenarios[0].matrices.raw;
    assert!((m[0][1].unwrap() - 1.0).abs() < 1e-12);
    assert!(m[0][2].unwrap() < 0.2);
}

#[test]
fn independent_noise_has_low_entanglement() {
    let ds = white_noise(3, 3, 1000);
    let r = feature_entanglement(&ds, &identity(&ds), &cfg()).unwrap();
    // |r| of independent series concentrates near sqrt(2 / (pi T)) = 0.025
    assert!(r.grand_mean.raw < 0.1, "{}", r.grand_mean.raw);
    for s in &r.scenarios {
        assert_well_formed(&s.matrices.raw, true);
        assert!(upper(&s.matrices.raw).iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert_eq!(r.pairs.len(), 21);
    assert_eq!(r.pairs[0].values.raw.len(), 9);
}

#[test]
fn mixer_raises_entanglement_monotonically() {
    let ds = white_noise(4, 3, 1000);
    let mut prev = f64::NEG_INFINITY;
    let mut raw = 0.0;
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let spec = EmbedderSpec::Mixer { base: Box::new(EmbedderSpec::Identity), alpha, seed: 8 };
        let r = feature_entanglement(&ds, &embed_dataset(&ds, &spec).unwrap(), &cfg()).unwrap();
        assert!(r.grand_mean.embedded >= prev, "alpha {alpha}: {} < {prev}", r.grand_mean.embedded);
        prev = r.grand_mean.embedded;
        raw = r.grand_mean.raw;
    }
    assert!(prev - raw > 0.2);
}

#[test]
fn first_component_mode_matches_raw_for_identity() {
    let ds = generated(2);
    let c = MetricsConfig { entanglement_mode: EntanglementMode::FirstComponent, ..cfg() };
    let r = feature_entanglement(&ds, &identity(&ds), &c).unwrap();
    assert_eq!(r.grand_mean.raw, r.grand_mean.embedded);
    let m = feature_entanglement(&ds, &identity(&ds), &cfg()).unwrap();
    assert!((r.grand_mean.raw - m.grand_mean.raw).abs() < 1e-9);
}

#[test]
fn identity_reconstructs_its_own_feature() {
    let ds = generated(5);
    let r = reconstruction_assessment(&ds, &identity(&ds), &cfg(), 5).unwrap();
    for i in 0..7 {
        assert!(r.test_r2.embedded[i][i].unwrap() >= 1.0 - 1e-9);
        assert!(r.cv_mean.embedded[i][i].unwrap() >= 1.0 - 1e-9);
    }
    for row in r.test_r2.embedded.iter().chain(&r.test_r2.raw) {
        assert!(row.iter().flatten().all(|&v| v <= 1.0));
    }
    assert_eq!(r.n_train + r.n_test, 15 * 1000);
    assert_eq!(r.n_train, 12_000);
}

#[test]
fn pure_noise_embeddings_reconstruct_nothing() {
    let ds = generated(6);
    let spec = EmbedderSpec::Shuffler {
        base: Box::new(EmbedderSpec::RandomProjection { window: 8, dims: 16, seed: 2 }),
        seed: 3,
    };
    let r = reconstruction_assessment(&ds, &embed_dataset(&ds, &spec).unwrap(), &cfg(), 6).unwrap();
    for i in 0..7 {
        assert!(r.test_r2.embedded[i][i].unwrap() <= 0.05);
    }
}

#[test]
fn delay_embedding_recovers_a_linear_filter() {
    let len = 600;
    let ds = Dataset::from_fn(&["a", "b"], 2, len, |s, p, f| {
        let x = noise(7, &format!("{s}{p}"), len);
        match f {
            // a fixed FIR filter of the arterial pressure input
            FeatureId::HeartRate => {
                let at = |t: isize| x[t.max(0) as usize];
                (0..len as isize).map(|t| 0.5 * at(t) - 0.3 * at(t - 1) + 0.2 * at(t - 2)).collect()
            }
            FeatureId::ArterialPressure => x,
            _ => noise(8, &format!("{s}{p}{f}"), len),
        }
    })
    .unwrap();
    let emb = embed_dataset(&ds, &EmbedderSpec::Delay { window: 3 }).unwrap();
    let r = reconstruction_assessment(&ds, &emb, &cfg(), 1).unwrap();
    let (a, h) = (FeatureId::ArterialPressure.index(), FeatureId::HeartRate.index());
    assert!(r.test_r2.embedded[a][h].unwrap() >= 0.99);
    // a single raw sample cannot see the lags
    assert!(r.test_r2.raw[a][h].unwrap() < 0.9);
}

fn sinusoids(len: usize) -> Dataset {
    Dataset::from_fn(&["s1", "s2"], 3, len, |s, p, f| {
        let k = (f.index() + 1) as f64;
        let phase = 0.3 * s as f64 + 0.1 * p as f64;
        (0..len).map(|t| (2.0 * PI * k * t as f64 / len as f64 + phase).sin()).collect()
    })
    .unwrap()
}

#[test]
fn independent_sinusoids_span_the_feature_space() {
    let ds = sinusoids(1000);
    let r = temporal_dynamics(&ds, &identity(&ds), &cfg(), 1).unwrap();
    for e in &r.entries {
        assert!(e.dimensionality.raw >= 6, "{:?}", e.dimensionality);
        assert!(e.smoothness.raw >= 0.9);
        assert_eq!(e.dimensionality.raw, e.dimensionality.embedded);
        assert_eq!(e.smoothness.raw, e.smoothness.embedded);
        assert_eq!(e.trajectory.raw, e.trajectory.embedded);
        assert_eq!(e.trajectory.raw.len(), 3);
    }
}

#[test]
fn shuffler_destroys_smoothness() {
    let ds = sinusoids(1000);
    let spec = EmbedderSpec::Shuffler { base: Box::new(EmbedderSpec::Identity), seed: 4 };
    let r = temporal_dynamics(&ds, &embed_dataset(&ds, &spec).unwrap(), &cfg(), 1).unwrap();
    for e in &r.entries {
        assert!(e.smoothness.embedded <= 0.1, "{}", e.smoothness.embedded);
        assert!(e.smoothness.embedded < e.smoothness.raw - 0.5);
    }
}

#[test]
fn per_patient_dynamics_has_one_entry_per_patient() {
    let ds = sinusoids(300);
    let c = MetricsConfig { per_patient: true, ..cfg() };
    let r = temporal_dynamics(&ds, &identity(&ds), &c, 1).unwrap();
    assert_eq!(r.entries.len(), 6);
    assert!(r.entries.iter().all(|e| e.patient.is_some()));
}

#[test]
fn identical_scenarios_are_fully_similar() {
    let ds = Dataset::from_fn(&["a", "b"], 2, 200, |_, p, f| noise(1, &format!("{p}{f}"), 200)).unwrap();
    let r = scenario_similarity(&ds, &identity(&ds), &cfg()).unwrap();
    assert!((r.mean_off_diagonal.raw.unwrap() - 1.0).abs() < 1e-12);
    assert_well_formed(&r.cosine.raw, true);
}

#[test]
fn orthogonal_scenarios_have_zero_similarity() {
    let len = 400;
    let ds = Dataset::from_fn(&["sin", "cos"], 1, len, |s, _, f| {
        let k = (f.index() + 1) as f64;
        (0..len)
            .map(|t| {
                let a = 2.0 * PI * k * t as f64 / len as f64;
                if s == 0 { a.sin() } else { a.cos() }
            })
            .collect()
    })
    .unwrap();
    let r = scenario_similarity(&ds, &identity(&ds), &cfg()).unwrap();
    assert!(r.mean_off_diagonal.raw.unwrap().abs() < 1e-12);
}

#[test]
fn three_generic_scenarios_need_two_components() {
    let ds = white_noise(9, 2, 300);
    let r = scenario_similarity(&ds, &identity(&ds), &cfg()).unwrap();
    assert_eq!(r.dimensionality.raw, Some(2));
    assert_eq!(r.dimensionality, r.dimensionality.clone().map(|d| d));
    assert_eq!(r.cosine.raw, r.cosine.embedded);
}

/// Sinusoid with a period dividing the window, plus a little noise.
fn sine_vs_noise(len: usize) -> Dataset {
    Dataset::from_fn(&["a", "b", "c"], 4, len, |s, p, f| {
        let n = noise(11, &format!("{s}{p}{f}"), len);
        if f == FeatureId::ArterialPressure {
            (0..len).map(|t| (2.0 * PI * t as f64 / 25.0).sin() + 0.1 * n[t]).collect()
        } else {
            n
        }
    })
    .unwrap()
}

/// Distance-to-centroid score: nearer the positive centroid scores higher.
fn nearest_centroid_auc(train: &[(Vec<f64>, bool)], test: &[(Vec<f64>, bool)]) -> f64 {
    let centroid = |label: bool| {
        let rows: Vec<&Vec<f64>> = train.iter().filter(|r| r.1 == label).map(|r| &r.0).collect();
        (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect::<Vec<_>>()
    };
    let (c0, c1) = (centroid(false), centroid(true));
    let d = |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let scores: Vec<f64> = test.iter().map(|(x, _)| d(x, &c0) - d(x, &c1)).collect();
    let labels: Vec<bool> = test.iter().map(|r| r.1).collect();
    auc_roc(&scores, &labels).unwrap()
}

#[test]
fn sinusoid_is_decodable_from_noise() {
    let ds = sine_vs_noise(1000);
    let r = feature_decoding(&ds, &identity(&ds), &cfg(), 3).unwrap();
    let (a, b) = (FeatureId::ArterialPressure.index(), FeatureId::HeartRate.index());
    let auc = r.auc.raw[a][b].unwrap();
    assert!(auc >= 0.95, "{auc}");

    // oracle: windows of one patient for train, another for test
    let window = |s: &str, p: &str, f: FeatureId, w: usize| ds.get(s, p, f).unwrap().values[w * 50..(w + 1) * 50].to_vec();
    let collect = |patients: &[&str]| {
        let mut out = Vec::new();
        for s in ["a", "b", "c"] {
            for p in patients {
                for w in 0..20 {
                    out.push((window(s, p, FeatureId::ArterialPressure, w), false));
                    out.push((window(s, p, FeatureId::HeartRate, w), true));
                }
            }
        }
        out
    };
    let oracle = nearest_centroid_auc(&collect(&["patient_01", "patient_02", "patient_03"]), &collect(&["patient_04"]));
    // the centroid oracle orders labels the other way round; both must separate
    assert!(oracle.max(1.0 - oracle) >= 0.95, "{oracle}");
}

#[test]
fn identical_generators_are_indistinguishable() {
    let len = 1000;
    let ds = Dataset::from_fn(&["a", "b", "c"], 5, len, |s, p, _| noise(12, &format!("{s}{p}"), len)).unwrap();
    let r = feature_decoding(&ds, &identity(&ds), &cfg(), 1).unwrap();
    assert!((r.mean.raw - 0.5).abs() <= 0.1, "{}", r.mean.raw);
}

#[test]
fn permuted_labels_give_chance_on_every_pair() {
    let ds = generated(13);
    let big = embedprobe::scenario::canonicalize(
        &embedprobe::scenario::generate_dataset(&embedprobe::scenario::GeneratorConfig {
            seed: 13,
            patients_per_scenario: 20,
            ..Default::default()
        })
        .unwrap(),
        &Default::default(),
    )
    .unwrap();
    let c = MetricsConfig { permute_labels: true, ..cfg() };
    let r = feature_decoding(&big, &identity(&big), &c, 2).unwrap();
    assert!(r.labels_permuted);
    for v in upper(&r.auc.raw) {
        assert!((v - 0.5).abs() <= 0.1, "{v}");
    }
    let unpermuted = feature_decoding(&ds, &identity(&ds), &cfg(), 2).unwrap();
    assert!(unpermuted.mean.raw > 0.9);
}

#[test]
fn decoding_matrix_shape() {
    let ds = generated(14);
    let r = feature_decoding(&ds, &identity(&ds), &cfg(), 4).unwrap();
    assert_well_formed(&r.auc.raw, false);
    for i in 0..7 {
        assert_eq!(r.auc.raw[i][i], None);
    }
    assert!(upper(&r.auc.raw).iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(r.pairs.len(), 21);
    assert_eq!(r.pairs[0].n_train + r.pairs[0].n_test, 2 * 15 * 20);
    assert_eq!(r.auc.raw, r.auc.embedded);
}

#[test]
fn window_longer_than_signal_is_rejected() {
    let ds = white_noise(1, 1, 40);
    let r = feature_decoding(&ds, &identity(&ds), &cfg(), 0);
    assert!(matches!(r, Err(MetricsError::InvalidConfig(_))));
}

#[test]
fn non_canonical_input_is_rejected() {
    let ds = embedprobe::scenario::generate_dataset(&embedprobe::scenario::GeneratorConfig {
        patients_per_scenario: 1,
        duration_s: 100.0,
        ..Default::default()
    })
    .unwrap();
    let r = feature_entanglement(&ds, &identity(&ds), &cfg());
    assert!(matches!(r, Err(MetricsError::NotCanonical(_))));
}

#[test]
fn missing_embedding_cell_is_named() {
    let ds = white_noise(1, 1, 100);
    let mut emb = EmbeddingSet::new("partial");
    for m in identity(&ds).iter().skip(1) {
        emb.insert(m.clone());
    }
    let err = feature_entanglement(&ds, &emb, &cfg()).unwrap_err();
    assert!(err.to_string().contains("hemorrhage/patient_01/arterial_pressure"), "{err}");
}
