#![allow(dead_code)]

use embedprobe::scenario::{canonicalize, generate_dataset, CanonicalOptions, Dataset, GeneratorConfig};
use embedprobe::seed::derived_rng;
use rand_distr::{Distribution, StandardNormal};

pub const SCENARIOS: [&str; 3] = ["hemorrhage", "sepsis", "multi_organ_failure"];

pub fn generated(seed: u64) -> Dataset {
    let cfg = GeneratorConfig { seed, ..Default::default() };
    canonicalize(&generate_dataset(&cfg).unwrap(), &CanonicalOptions::default()).unwrap()
}

pub fn noise(seed: u64, tag: &str, len: usize) -> Vec<f64> {
    let mut rng = derived_rng(seed, &[tag]);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Every cell independent standard white noise.
pub fn white_noise(seed: u64, n_patients: usize, len: usize) -> Dataset {
    Dataset::from_fn(&SCENARIOS, n_patients, len, |s, p, f| noise(seed, &format!("{s}/{p}/{}", f.name()), len)).unwrap()
}
