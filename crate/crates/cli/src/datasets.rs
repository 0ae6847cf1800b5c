//! Synthetic data used by the experiments: piecewise-constant community
//! signals with Gaussian noise, and Gaussian blob features for the
//! classification runs.

use gtf_core::SignalMatrix;
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Ground-truth node signal: community c gets `values[c]`.
pub fn piecewise_signal(labels: &[usize], values: &[f64]) -> Array1<f64> {
    Array1::from_iter(labels.iter().map(|&l| values[l]))
}

/// Stack `d` independent noisy realizations of a scalar ground truth as
/// columns: column j is y_star + N(0, sigma2 I).
pub fn noisy_realizations(
    y_star: &Array1<f64>,
    d: usize,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> SignalMatrix {
    let n = y_star.len();
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("sigma2 >= 0");
    let mut data = Array2::zeros((n, d));
    for j in 0..d {
        for i in 0..n {
            data[[i, j]] = y_star[i] + normal.sample(rng);
        }
    }
    SignalMatrix::new(data).expect("finite noise")
}

/// The noiseless matrix with the ground truth replicated across d columns.
pub fn replicate_columns(y_star: &Array1<f64>, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((y_star.len(), d), |(i, _)| y_star[i])
}

/// Isotropic Gaussian blobs: `per_class` points around each center.
/// Returns the feature matrix and the class of each row.
pub fn gaussian_blobs(
    centers: &[[f64; 2]],
    per_class: usize,
    sigma: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    let n = centers.len() * per_class;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let i = labels.len();
            features[[i, 0]] = center[0] + normal.sample(&mut rng);
            features[[i, 1]] = center[1] + normal.sample(&mut rng);
            labels.push(c);
        }
    }
    (features, labels)
}

/// Draw `count` distinct observed indices out of n, uniformly.
pub fn sample_mask(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut mask = vec![false; n];
    for &i in idx.iter().take(count.min(n)) {
        mask[i] = true;
    }
    mask
}
