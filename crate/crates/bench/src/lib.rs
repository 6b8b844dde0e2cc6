//! Shared fixtures for the criterion benchmarks under `benches/`.

use oft_core::synth::{perturb, render, NoiseSpec, SceneSpec};
use oft_core::{OutputState, Snippet};

/// The seeded 64×208 textured scene with a depth-perturbed prior.
pub fn textured_fixture(seed: u64) -> (OutputState, Snippet) {
    let pair = render(&SceneSpec::random_textured(seed)).expect("built-in scene renders");
    let noise = NoiseSpec {
        depth_log_sigma: 0.1,
        seed,
        ..NoiseSpec::default()
    };
    let prior = perturb(&pair, &noise).expect("valid noise");
    (prior, pair.snippet())
}
