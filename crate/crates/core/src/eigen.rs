//! Top-k eigenpairs of symmetric matrices.
//!
//! Dense symmetric decomposition is plenty at the problem sizes this crate
//! targets; the contract callers rely on is the residual bound
//! ||S v - lambda v|| <= 1e-8 ||S||, orthonormal vectors, deterministic
//! ordering and a fixed sign convention, not the method.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Which end of the spectrum to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Largest,
    Smallest,
}

/// k eigenvalue/eigenvector pairs of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Eigenvalues: descending for `Largest`, ascending for `Smallest`.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one column per value.
    pub vectors: Array2<f64>,
    pub which: Which,
}

const SYMMETRY_TOL: f64 = 1e-10;

/// Compute the k largest or smallest eigenpairs of a symmetric matrix.
///
/// Asymmetry up to 1e-10 (relative to the largest entry) is tolerated and
/// symmetrized away; larger asymmetry is an error. Each returned vector is
/// normalized so its first nonzero component is positive.
pub fn top_eigenpairs(s: ArrayView2<'_, f64>, k: usize, which: Which) -> Result<EigenPairs> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected square",
            n,
            s.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k={k} out of range for {n}x{n} matrix"
        )));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((s[[i, j]] - s[[j, i]]).abs());
        }
    }
    if max_asym > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric(max_asym));
    }

    let m = DMatrix::from_fn(n, n, |r, c| 0.5 * (s[[r, c]] + s[[c, r]]));
    let decomp = m
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::ConvergenceFailure)?;

    let mut order: Vec<usize> = (0..n).collect();
    match which {
        Which::Largest => order.sort_by(|&a, &b| {
            decomp.eigenvalues[b].partial_cmp(&decomp.eigenvalues[a]).unwrap()
        }),
        Which::Smallest => order.sort_by(|&a, &b| {
            decomp.eigenvalues[a].partial_cmp(&decomp.eigenvalues[b]).unwrap()
        }),
    }

    let mut values = Vec::with_capacity(k);
    let mut vectors = Array2::zeros((n, k));
    for (out, &idx) in order.iter().take(k).enumerate() {
        values.push(decomp.eigenvalues[idx]);
        let col = decomp.eigenvectors.column(idx);
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, |v| if *v < 0.0 { -1.0 } else { 1.0 });
        for r in 0..n {
            vectors[[r, out]] = sign * col[r];
        }
    }
    Ok(EigenPairs { values, vectors, which })
}

/// Top-k eigenpairs of Y Y^T computed through the d x d Gram matrix Y^T Y
/// when d < n: the nonzero eigenvalues agree and u_i = Y v_i / sqrt(sigma_i).
/// Eigenvalues beyond the rank are returned as exact zeros with zero
/// columns, matching the convention that those coordinates contribute
/// nothing downstream.
pub fn gram_top_eigenpairs(y: ArrayView2<'_, f64>, k: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = y.nrows();
    let d = y.ncols();
    if k > n {
        return Err(Error::InvalidParameter(format!("k={k} exceeds n={n}")));
    }
    if d >= n {
        let yyt = y.dot(&y.t());
        let pairs = top_eigenpairs(yyt.view(), k, Which::Largest)?;
        return Ok((pairs.values, pairs.vectors));
    }

    let gram = y.t().dot(&y);
    let inner = top_eigenpairs(gram.view(), d, Which::Largest)?;
    let cutoff = inner.values.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;

    let mut values = vec![0.0; k];
    let mut vectors = Array2::zeros((n, k));
    for j in 0..k.min(d) {
        let sigma = inner.values[j];
        if sigma <= cutoff {
            break;
        }
        values[j] = sigma;
        let u = y.dot(&inner.vectors.column(j));
        let norm = sigma.sqrt();
        let sign = u
            .iter()
            .find(|v| v.abs() > 1e-12 * norm)
            .map_or(1.0, |v| if *v < 0.0 { -1.0 } else { 1.0 });
        for r in 0..n {
            vectors[[r, j]] = sign * u[r] / norm;
        }
    }
    Ok((values, vectors))
}
