//! Seeded k-means: k-means++ initialization, Lloyd iterations, empty-cluster
//! reseeding to the farthest point, best-of-restarts selection.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Output of a k-means run.
#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
}

/// Lloyd's algorithm from k-means++ seeding; the best of `restarts` runs by
/// inertia wins. Deterministic given the seed: restart r uses a stream
/// derived from (seed, r) and ties in both seeding and assignment break
/// toward the smaller index.
pub fn kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let m = points.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if m < k {
        return Err(Error::TooFewPoints { m, k });
    }
    let restarts = restarts.max(1);
    let runs: Vec<KMeansResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            lloyd_once(points, k, max_iter, &mut rng)
        })
        .collect();
    Ok(runs
        .into_iter()
        .min_by(|a, b| a.inertia.partial_cmp(&b.inertia).unwrap())
        .expect("at least one restart"))
}

/// Mix a salt into a base seed; used to give restarts, screening candidates
/// and experiment repetitions independent, reproducible streams.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dist_sq(a: ArrayView2<'_, f64>, i: usize, c: &Array2<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(c.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn lloyd_once(
    points: ArrayView2<'_, f64>,
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansResult {
    let m = points.nrows();
    let dim = points.ncols();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; m];
    let mut dists = vec![0.0f64; m];

    for _ in 0..max_iter {
        // Assignment step; ties go to the smaller centroid index.
        let mut changed = false;
        for i in 0..m {
            let mut best = 0usize;
            let mut best_d = dist_sq(points, i, &centroids, 0);
            for c in 1..k {
                let d = dist_sq(points, i, &centroids, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            dists[i] = best_d;
        }

        // Reseed empty clusters to the farthest point, only stealing from
        // clusters with at least two members so a reseed never empties
        // another cluster.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        let empty: Vec<usize> =
            counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(c, _)| c).collect();
        for c in empty {
            let far = (0..m)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    dists[a].partial_cmp(&dists[b]).unwrap().then(b.cmp(&a))
                })
                .expect("m >= k guarantees a splittable cluster");
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
            dists[far] = 0.0;
            changed = true;
        }

        // Update step.
        let mut next = Array2::<f64>::zeros((k, dim));
        for (i, &l) in labels.iter().enumerate() {
            let mut row = next.row_mut(l);
            row += &points.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mut row = next.row_mut(c);
                row /= count as f64;
            } else {
                next.row_mut(c).assign(&centroids.row(c));
            }
        }
        centroids = next;

        if !changed {
            break;
        }
    }

    let inertia = (0..m).map(|i| dist_sq(points, i, &centroids, labels[i])).sum();
    KMeansResult { labels, centroids, inertia }
}

fn plus_plus_init(points: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = points.nrows();
    let dim = points.ncols();
    let mut centroids = Array2::zeros((k, dim));
    let first = rng.random_range(0..m);
    centroids.row_mut(0).assign(&points.row(first));

    let mut d2: Vec<f64> = (0..m).map(|i| dist_sq(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centroids.row_mut(c).assign(&points.row(chosen));
        for (i, slot) in d2.iter_mut().enumerate() {
            let d = dist_sq(points, i, &centroids, c);
            if d < *slot {
                *slot = d;
            }
        }
    }
    centroids
}
