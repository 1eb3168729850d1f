//! Deterministic inputs shared by the benchmarks.

use embedprobe::scenario::{canonicalize, generate_dataset, CanonicalOptions};
use embedprobe::seed::derived_rng;
use embedprobe::{Dataset, GeneratorConfig};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = derived_rng(seed, &["matrix"]);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

pub fn gaussian_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = derived_rng(seed, &["vec"]);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Labels that depend on the first column of `x`, so fits are non-trivial.
pub fn noisy_labels(x: &DMatrix<f64>, seed: u64) -> Vec<bool> {
    let mut rng = derived_rng(seed, &["labels"]);
    (0..x.nrows()).map(|i| x[(i, 0)] + rng.random::<f64>() - 0.5 > 0.0).collect()
}

pub fn canonical_dataset(patients_per_scenario: usize, seed: u64) -> Dataset {
    let cfg = GeneratorConfig { patients_per_scenario, seed, ..Default::default() };
    canonicalize(&generate_dataset(&cfg).expect("valid generator config"), &CanonicalOptions::default())
        .expect("generated data canonicalises")
}
