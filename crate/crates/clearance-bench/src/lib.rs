//! Shared fixtures for the pipeline benchmarks.

use clearance_core::dataset::{filter_unknown_age, Dataset};
use clearance_core::features::{encode, fit_schema, FeatureMatrix, FeatureOptions};
use clearance_core::synth::{generate, SynthConfig};

/// A filtered, overlap-stamped synthetic dataset of the given size.
pub fn dataset(rows: usize, seed: u64) -> Dataset {
    let d = generate(&SynthConfig {
        rows,
        seed,
        ..Default::default()
    });
    filter_unknown_age(&d).with_monthly_overlap()
}

/// The dataset encoded under its own fitted schema.
pub fn encoded(rows: usize, seed: u64) -> FeatureMatrix {
    let d = dataset(rows, seed);
    let schema = fit_schema(&d, &FeatureOptions::default()).unwrap();
    encode(&d, &schema).unwrap()
}
