//! Shared fixtures for the pipeline benchmarks.

use syncluster_core::{generate, GroundTruth, GroupKind, ObservationMatrix, Rates, SgbmParams};

/// An instance comfortably inside the recovery region, so solve-time
/// benchmarks measure the typical fast-convergence regime.
pub fn easy_instance(n: usize, k: usize, d: usize, seed: u64) -> (GroundTruth, ObservationMatrix) {
    let params = SgbmParams::new(
        n,
        k,
        GroupKind::SpecialOrthogonal(d),
        Rates::Logarithmic { alpha: 30.0, beta: 5.0 },
    )
    .unwrap();
    generate(&params, seed).unwrap()
}
