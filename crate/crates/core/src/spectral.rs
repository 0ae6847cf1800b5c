//! Spectral solver: embed nodes through the leading eigenpairs of Y Y^T and
//! the trailing eigenpairs of L, cluster the embedded vectors with k-means,
//! and screen over the cluster count.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{gram_top_eigenpairs, top_eigenpairs, Which};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kmeans::{derive_seed, kmeans};
use crate::model::{Assignment, GtfSolution, SignalMatrix};

/// Solver options shared by the fixed-k solve and the screening loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralOpts {
    /// k-means restarts per clustering.
    pub restarts: usize,
    /// Lloyd iteration cap per restart.
    pub max_iter: usize,
    /// Extra k-means passes that refit the per-point weights 1/sqrt(|C|)
    /// from the previous clustering.
    pub reweight_passes: usize,
    pub seed: u64,
}

impl Default for SpectralOpts {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300, reweight_passes: 1, seed: 0 }
    }
}

/// Node embedding built from the two eigensystems.
///
/// Row i of `r` is sqrt(sigma_j) U_ij over the k leading eigenpairs of
/// Y Y^T; row i of `t` is sqrt(alpha - gamma_j) V_ij over the k trailing
/// eigenpairs of L; `z` concatenates the weighted r-block with sqrt(lambda)
/// times the t-block.
#[derive(Clone, Debug)]
pub struct SpectralEmbedding {
    pub r: Array2<f64>,
    pub t: Array2<f64>,
    pub alpha: f64,
    pub z: Array2<f64>,
}

/// The spectrum-shift constant minimizing the truncation error: the mean of
/// the n-k Laplacian eigenvalues that the embedding drops. Only the k
/// retained (smallest) eigenvalues are needed because the full sum is
/// available as Tr(L).
pub fn optimal_alpha(
    trace_l: f64,
    gamma_smallest_k: &[f64],
    n: usize,
    k: usize,
) -> Result<f64> {
    if k >= n {
        return Err(Error::KEqualsN { k, n });
    }
    if gamma_smallest_k.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected {k} eigenvalues, got {}",
            gamma_smallest_k.len()
        )));
    }
    let kept: f64 = gamma_smallest_k.iter().sum();
    Ok((trace_l - kept) / (n - k) as f64)
}

/// Caches the eigendecompositions shared across lambda values, cluster
/// counts and k-means restarts for a fixed (signal, graph) pair.
pub struct Embedder {
    sigma: Vec<f64>,
    u: Array2<f64>,
    gamma: Vec<f64>,
    v: Array2<f64>,
    trace_l: f64,
    n: usize,
}

impl Embedder {
    /// Decompose once, keeping up to `k_max` pairs on each side. Y Y^T goes
    /// through the d x d Gram matrix when d < n.
    pub fn new(y: &SignalMatrix, g: &Graph, k_max: usize) -> Result<Self> {
        if y.n() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "signal n={}, graph n={}",
                y.n(),
                g.n()
            )));
        }
        let n = g.n();
        let k_max = k_max.min(n).max(1);
        let (sigma, u) = gram_top_eigenpairs(y.view(), k_max)?;
        let lap = g.laplacian_dense();
        let pairs = top_eigenpairs(lap.view(), k_max, Which::Smallest)?;
        Ok(Self {
            sigma,
            u,
            gamma: pairs.values,
            v: pairs.vectors,
            trace_l: g.laplacian_trace(),
            n,
        })
    }

    pub fn max_k(&self) -> usize {
        self.gamma.len()
    }

    /// Assemble the k-dimensional embedding for a given penalty weight and
    /// per-point weights (the weights multiply the r-block only).
    pub fn embedding(&self, lambda: f64, k: usize, weights: &[f64]) -> Result<SpectralEmbedding> {
        if k == 0 || k > self.max_k() {
            return Err(Error::InvalidParameter(format!(
                "k={k} out of range (decomposed up to {})",
                self.max_k()
            )));
        }
        if weights.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} weights, got {}",
                self.n,
                weights.len()
            )));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
        }
        let alpha = if k < self.n {
            let a = optimal_alpha(self.trace_l, &self.gamma[..k], self.n, k)?;
            let floor = self.gamma[k - 1];
            if a < floor {
                floor + 1e-9
            } else {
                a
            }
        } else {
            // Full spectrum: no truncation error, any shift above the top
            // eigenvalue works.
            self.gamma[k - 1]
        };

        let mut r = Array2::zeros((self.n, k));
        let mut t = Array2::zeros((self.n, k));
        for j in 0..k {
            let sr = self.sigma[j].max(0.0).sqrt();
            let st = (alpha - self.gamma[j]).max(0.0).sqrt();
            for i in 0..self.n {
                r[[i, j]] = sr * self.u[[i, j]];
                t[[i, j]] = st * self.v[[i, j]];
            }
        }
        let sl = lambda.sqrt();
        let mut z = Array2::zeros((self.n, 2 * k));
        for i in 0..self.n {
            for j in 0..k {
                z[[i, j]] = weights[i] * r[[i, j]];
                z[[i, k + j]] = sl * t[[i, j]];
            }
        }
        Ok(SpectralEmbedding { r, t, alpha, z })
    }
}

/// One-shot embedding construction (decompose + assemble).
pub fn build_embedding(
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k: usize,
    weights: &[f64],
) -> Result<SpectralEmbedding> {
    Embedder::new(y, g, k)?.embedding(lambda, k, weights)
}

/// The group-sum objective of the embedded vector-partition view:
/// sum_h ||xi_h||^2 + ||zeta_h||^2 - lambda * alpha * n, with
/// xi_h = |C_h|^{-1/2} sum_{i in C_h} r_i and
/// zeta_h = sqrt(lambda) sum_{i in C_h} t_i. With the full spectrum this
/// equals the trace objective exactly; truncated, it is the quantity the
/// clustering maximizes.
pub fn vpp_objective(emb: &SpectralEmbedding, x: &Assignment, lambda: f64) -> f64 {
    let n = emb.r.nrows();
    let k_emb = emb.r.ncols();
    let sizes = x.cluster_sizes();
    let mut r_sums = Array2::<f64>::zeros((x.k(), k_emb));
    let mut t_sums = Array2::<f64>::zeros((x.k(), k_emb));
    for (i, &l) in x.labels().iter().enumerate() {
        for j in 0..k_emb {
            r_sums[[l, j]] += emb.r[[i, j]];
            t_sums[[l, j]] += emb.t[[i, j]];
        }
    }
    let mut total = 0.0;
    for (h, &size) in sizes.iter().enumerate() {
        if size == 0 {
            continue;
        }
        let xi: f64 = r_sums.row(h).iter().map(|v| v * v).sum::<f64>() / size as f64;
        let zeta: f64 = lambda * t_sums.row(h).iter().map(|v| v * v).sum::<f64>();
        total += xi + zeta;
    }
    total - lambda * emb.alpha * n as f64
}

/// Solve for a fixed cluster count: embed, cluster, refit the per-point
/// weights from the first clustering for `reweight_passes` extra rounds,
/// then assemble the solution from the final labels.
pub fn solve_p2_fixed_k(
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k: usize,
    opts: &SpectralOpts,
) -> Result<GtfSolution> {
    let embedder = Embedder::new(y, g, k)?;
    solve_fixed_k_with(&embedder, y, g, lambda, k, opts)
}

/// Fixed-k solve against an existing [`Embedder`]; the decomposition is
/// shared across penalty weights and cluster counts, so sweeps over lambda
/// or k pay for it once.
pub fn solve_fixed_k_with(
    embedder: &Embedder,
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k: usize,
    opts: &SpectralOpts,
) -> Result<GtfSolution> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} out of range for n={n}")));
    }
    let mut weights = vec![1.0f64; n];
    let mut labels: Vec<usize> = vec![0; n];
    for pass in 0..=opts.reweight_passes {
        let emb = embedder.embedding(lambda, k, &weights)?;
        let run = kmeans(
            emb.z.view(),
            k,
            opts.restarts,
            opts.max_iter,
            derive_seed(opts.seed, pass as u64),
        )?;
        labels = run.labels;
        if pass < opts.reweight_passes {
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            for (i, &l) in labels.iter().enumerate() {
                weights[i] = 1.0 / (sizes[l].max(1) as f64).sqrt();
            }
        }
    }
    let assignment = Assignment::new(labels, k)?;
    GtfSolution::from_assignment(y, g, lambda, &assignment)
}

/// Objective value recorded for each candidate cluster count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub k: usize,
    pub effective_k: usize,
    pub p1_objective: f64,
}

/// Result of screening k = 1..k_max.
#[derive(Debug)]
pub struct ScreenResult {
    pub solution: GtfSolution,
    /// Per-candidate objective table in screening order.
    pub per_k: Vec<ScreenEntry>,
}

/// Screen cluster counts 1..=k_max and keep the candidate with the smallest
/// objective. Candidates are independent and evaluated in parallel; each
/// uses a seed derived from (seed, k), so enlarging k_max never changes the
/// existing candidates.
pub fn solve_p2_screen(
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k_max: usize,
    opts: &SpectralOpts,
) -> Result<ScreenResult> {
    let embedder = Embedder::new(y, g, k_max.min(g.n()).max(1))?;
    solve_screen_with(&embedder, y, g, lambda, k_max, opts)
}

/// Screening loop against an existing [`Embedder`].
pub fn solve_screen_with(
    embedder: &Embedder,
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k_max: usize,
    opts: &SpectralOpts,
) -> Result<ScreenResult> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let k_max = k_max.min(g.n());
    let candidates: Vec<Result<GtfSolution>> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let sub = SpectralOpts { seed: derive_seed(opts.seed, k as u64), ..opts.clone() };
            solve_fixed_k_with(embedder, y, g, lambda, k, &sub)
        })
        .collect();

    let mut per_k = Vec::with_capacity(k_max);
    let mut best: Option<GtfSolution> = None;
    for (idx, cand) in candidates.into_iter().enumerate() {
        let sol = cand?;
        per_k.push(ScreenEntry {
            k: idx + 1,
            effective_k: sol.k,
            p1_objective: sol.p1_objective,
        });
        let better = best
            .as_ref()
            .is_none_or(|b| sol.p1_objective < b.p1_objective);
        if better {
            best = Some(sol);
        }
    }
    Ok(ScreenResult { solution: best.expect("k_max >= 1"), per_k })
}
