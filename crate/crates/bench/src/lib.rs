//! Fixtures shared by the benchmarks.

use agriprice_core::engine::preprocess;
use agriprice_core::ingest::{generate_synthetic, MissingPolicy, SyntheticSpec};
use agriprice_core::rng::CounterRng;
use agriprice_core::FeatureFrame;

/// Forward-filled synthetic preset with exogenous columns.
pub fn frame(name: &str, weeks: usize) -> FeatureFrame {
    let mut spec = SyntheticSpec::preset(name, 7).expect("known preset");
    spec.n_weeks = weeks;
    let raw = generate_synthetic(&spec).expect("valid preset");
    preprocess(&raw, MissingPolicy::ForwardFill).expect("preset has observed prices")
}

/// Uniform feature rows and a smooth noisy target.
pub fn regression_rows(n: usize, width: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = CounterRng::new(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..width).map(|_| rng.next_f64()).collect()).collect();
    let y = x
        .iter()
        .map(|r| r.iter().sum::<f64>().sin() + 0.1 * rng.next_f64())
        .collect();
    (x, y)
}
