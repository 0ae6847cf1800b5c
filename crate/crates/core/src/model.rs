//! The counting-norm trend-filtering objective family: edge-difference
//! penalty, cut sizes, closed-form centroids, and the equivalent objective
//! forms used by the solvers.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Node signals: an n x d matrix whose rows are per-node observations.
#[derive(Clone, Debug)]
pub struct SignalMatrix {
    data: Array2<f64>,
}

impl SignalMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter("signal matrix must be nonempty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("signal matrix must be finite".into()));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Squared Frobenius norm of the signal.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// A node-to-cluster assignment: length-n label vector with labels in
/// `0..k`, equivalently a 0/1 matrix with unit row sums.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || labels.is_empty() {
            return Err(Error::InvalidParameter("assignment needs k >= 1 and n >= 1".into()));
        }
        for &l in &labels {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
        }
        Ok(Self { labels, k })
    }

    /// Build from labels alone, taking k = max label + 1.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Dense one-hot matrix X in {0,1}^{n x k} with unit row sums.
    pub fn onehot(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.labels.len(), self.k));
        for (i, &l) in self.labels.iter().enumerate() {
            x[[i, l]] = 1.0;
        }
        x
    }

    /// Drop empty clusters, relabeling in order of first occurrence.
    pub fn compact(&self) -> Assignment {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels: Vec<usize> = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Assignment { labels, k: next }
    }

    /// Number of edges whose endpoints carry different labels. Equals
    /// (1/2) Tr(X^T L X) as an exact integer.
    pub fn cut_size(&self, g: &Graph) -> usize {
        g.edges()
            .iter()
            .filter(|&&(i, j)| self.labels[i] != self.labels[j])
            .count()
    }
}

/// A solver output: partition, per-cluster signal values, the reconstructed
/// piecewise-constant signal and its objective value.
#[derive(Clone, Debug)]
pub struct GtfSolution {
    /// Compacted assignment (every cluster nonempty).
    pub assignment: Assignment,
    /// k x d matrix of per-cluster signal values.
    pub centroids: Array2<f64>,
    /// n x d reconstruction; row i equals the centroid of node i's cluster.
    pub reconstruction: Array2<f64>,
    /// (1/2)||Y - X mu||_F^2 + lambda * cut.
    pub p1_objective: f64,
    pub cut_size: usize,
    /// Effective number of (nonempty) clusters.
    pub k: usize,
}

impl GtfSolution {
    /// Assemble the solution implied by an assignment: compact it, refit the
    /// centroids as cluster means, and evaluate the objective.
    pub fn from_assignment(
        y: &SignalMatrix,
        g: &Graph,
        lambda: f64,
        assignment: &Assignment,
    ) -> Result<Self> {
        if assignment.n() != y.n() || y.n() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "assignment n={}, signal n={}, graph n={}",
                assignment.n(),
                y.n(),
                g.n()
            )));
        }
        let compacted = assignment.compact();
        let centroids = centroid_closed_form(&compacted, y)?;
        let mut reconstruction = Array2::zeros((y.n(), y.d()));
        for (i, &l) in compacted.labels().iter().enumerate() {
            reconstruction.row_mut(i).assign(&centroids.row(l));
        }
        let p1_objective = objective_p1(y, &compacted, &centroids, g, lambda)?;
        let cut_size = compacted.cut_size(g);
        let k = compacted.k();
        Ok(Self { assignment: compacted, centroids, reconstruction, p1_objective, cut_size, k })
    }

    /// Wire format: `{k, labels, mu, objective, cut_size}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mu: Vec<Vec<f64>> = self
            .centroids
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        serde_json::json!({
            "k": self.k,
            "labels": self.assignment.labels(),
            "mu": mu,
            "objective": self.p1_objective,
            "cut_size": self.cut_size,
        })
    }
}

fn check_b_dims(b: ArrayView2<'_, f64>, g: &Graph) -> Result<()> {
    if b.nrows() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, graph has {} nodes",
            b.nrows(),
            g.n()
        )));
    }
    Ok(())
}

/// Count the edges across which the rows of `b` differ: the size of
/// `{(i,j) in E : ||b_i - b_j||_2 > tol}`. With `tol = 0` this is the exact
/// nonzero count.
pub fn l20_penalty(b: ArrayView2<'_, f64>, g: &Graph, tol: f64) -> Result<usize> {
    check_b_dims(b, g)?;
    Ok(g.edges()
        .iter()
        .filter(|&&(i, j)| row_dist(b, i, j) > tol)
        .count())
}

/// The edge set across which the rows of `b` differ. Removing these edges
/// disconnects the graph into components on which `b` is constant (within
/// `tol`).
pub fn boundary_edges(
    b: ArrayView2<'_, f64>,
    g: &Graph,
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    check_b_dims(b, g)?;
    Ok(g.edges()
        .iter()
        .copied()
        .filter(|&(i, j)| row_dist(b, i, j) > tol)
        .collect())
}

/// Default tolerance for counting edge differences of an arbitrary user
/// matrix: 1e-9 times the largest row norm. Solver reconstructions are
/// exactly piecewise-constant and use `tol = 0`.
pub fn default_boundary_tol(b: ArrayView2<'_, f64>) -> f64 {
    let max_row = b
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    1e-9 * max_row
}

fn row_dist(b: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    b.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cluster means: row c of the result is the mean of the signal rows with
/// label c. This is the unconstrained minimizer of ||Y - X mu||_F^2.
pub fn centroid_closed_form(x: &Assignment, y: &SignalMatrix) -> Result<Array2<f64>> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment n={}, signal n={}",
            x.n(),
            y.n()
        )));
    }
    let sizes = x.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    let mut mu = Array2::zeros((x.k(), y.d()));
    for (i, &l) in x.labels().iter().enumerate() {
        let mut row = mu.row_mut(l);
        row += &y.data().row(i);
    }
    for (c, &s) in sizes.iter().enumerate() {
        let mut row = mu.row_mut(c);
        row /= s as f64;
    }
    Ok(mu)
}

/// The raw objective: (1/2)||Y - B||_F^2 + lambda * (edge-difference count).
pub fn objective_p0(
    y: &SignalMatrix,
    b: ArrayView2<'_, f64>,
    g: &Graph,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    if b.nrows() != y.n() || b.ncols() != y.d() {
        return Err(Error::DimensionMismatch(format!(
            "signal is {}x{}, estimate is {}x{}",
            y.n(),
            y.d(),
            b.nrows(),
            b.ncols()
        )));
    }
    let penalty = l20_penalty(b, g, tol)? as f64;
    let fit: f64 = y
        .data()
        .iter()
        .zip(b.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * fit + lambda * penalty)
}

/// The factored objective: (1/2)||Y - X mu||_F^2 + (lambda/2) Tr(X^T L X).
/// The trace term counts each crossing edge twice, so it equals
/// lambda * cut_size.
pub fn objective_p1(
    y: &SignalMatrix,
    x: &Assignment,
    mu: &Array2<f64>,
    g: &Graph,
    lambda: f64,
) -> Result<f64> {
    if x.n() != y.n() || y.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment n={}, signal n={}, graph n={}",
            x.n(),
            y.n(),
            g.n()
        )));
    }
    if mu.nrows() != x.k() || mu.ncols() != y.d() {
        return Err(Error::DimensionMismatch(format!(
            "centroids are {}x{}, expected {}x{}",
            mu.nrows(),
            mu.ncols(),
            x.k(),
            y.d()
        )));
    }
    let mut fit = 0.0;
    for (i, &l) in x.labels().iter().enumerate() {
        fit += y
            .data()
            .row(i)
            .iter()
            .zip(mu.row(l).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(0.5 * fit + lambda * x.cut_size(g) as f64)
}

/// The trace form maximized by the spectral route:
/// q = Tr(Y Y^T X X^+) - lambda Tr(X^T L X), evaluated through cluster means
/// in O(nd + kd) rather than through any n x n product.
pub fn objective_q2(
    y: &SignalMatrix,
    x: &Assignment,
    g: &Graph,
    lambda: f64,
) -> Result<f64> {
    if x.n() != y.n() || y.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment n={}, signal n={}, graph n={}",
            x.n(),
            y.n(),
            g.n()
        )));
    }
    let sizes = x.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    // Tr(Y Y^T X X^+) = sum_c ||S_c||^2 / |C_c| with S_c the per-cluster
    // signal sum.
    let mut sums = Array2::<f64>::zeros((x.k(), y.d()));
    for (i, &l) in x.labels().iter().enumerate() {
        let mut row = sums.row_mut(l);
        row += &y.data().row(i);
    }
    let fit_trace: f64 = sums
        .rows()
        .into_iter()
        .zip(sizes.iter())
        .map(|(row, &s)| row.iter().map(|v| v * v).sum::<f64>() / s as f64)
        .sum();
    let cut_trace = 2.0 * x.cut_size(g) as f64;
    Ok(fit_trace - lambda * cut_trace)
}
