//! Shared fixtures for the solver benchmarks.

use gtf_core::graph::{planted_partition, PlantedPartition};
use gtf_core::SignalMatrix;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// The standard 200-node community instance with a noisy 10-column signal.
pub fn bench_instance(p: f64, q: f64, seed: u64) -> (PlantedPartition, SignalMatrix) {
    let pp = planted_partition(&[50, 70, 80], p, q, seed).unwrap();
    let values = [1.0, -1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157);
    let data = Array2::from_shape_fn((pp.graph.n(), 10), |(i, _)| {
        values[pp.labels[i]] + 0.05 * (rng.random::<f64>() - 0.5)
    });
    let y = SignalMatrix::new(data).unwrap();
    (pp, y)
}
