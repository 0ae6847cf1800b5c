//! Exhaustive reference solvers for tiny instances. These back the
//! correctness tests of the real solvers and are deliberately simple:
//! enumerate every set partition, evaluate the exact objective, keep the
//! minimum.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::map::{closed_form_b, objective_q1, predict, MapInstance, MapSolution};
use crate::model::{Assignment, GtfSolution, SignalMatrix};

/// Hard cap for exhaustive enumeration; Bell(12) = 4,213,597.
pub const MAX_ENUMERATION_N: usize = 12;

/// Streams every set partition of {0..n} exactly once as a canonical
/// restricted-growth string: labels appear in first-occurrence order, so no
/// partition is produced twice under relabeling.
#[derive(Debug)]
pub struct PartitionIter {
    labels: Vec<usize>,
    prefix_max: Vec<usize>,
    started: bool,
}

impl PartitionIter {
    fn new(n: usize) -> Self {
        Self { labels: vec![0; n], prefix_max: vec![0; n], started: false }
    }
}

impl Iterator for PartitionIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let n = self.labels.len();
        if !self.started {
            self.started = true;
            return Some(self.labels.clone());
        }
        // Rightmost position whose label can still grow within the
        // restricted-growth constraint labels[i] <= 1 + max(labels[..i]).
        let mut i = n;
        loop {
            if i <= 1 {
                return None;
            }
            i -= 1;
            if self.labels[i] <= self.prefix_max[i - 1] {
                break;
            }
        }
        self.labels[i] += 1;
        self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
        for j in (i + 1)..n {
            self.labels[j] = 0;
            self.prefix_max[j] = self.prefix_max[j - 1];
        }
        Some(self.labels.clone())
    }
}

/// Enumerate all set partitions of n elements (n <= 12).
pub fn enumerate_partitions(n: usize) -> Result<PartitionIter> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge(n));
    }
    Ok(PartitionIter::new(n))
}

/// Global minimizer of the factored objective over all partitions, with
/// centroids refit as cluster means per candidate.
pub fn brute_force_p1(y: &SignalMatrix, g: &Graph, lambda: f64) -> Result<GtfSolution> {
    let n = g.n();
    let mut best: Option<GtfSolution> = None;
    for labels in enumerate_partitions(n)? {
        let assignment = Assignment::from_labels(labels)?;
        let sol = GtfSolution::from_assignment(y, g, lambda, &assignment)?;
        let better = best.as_ref().is_none_or(|b| sol.p1_objective < b.p1_objective);
        if better {
            best = Some(sol);
        }
    }
    Ok(best.expect("n >= 1 yields at least one partition"))
}

/// Global minimizer of the masked-label objective over all partitions.
pub fn brute_force_q1(inst: &MapInstance) -> Result<MapSolution> {
    let n = inst.graph().n();
    let mut best: Option<(f64, Assignment)> = None;
    for labels in enumerate_partitions(n)? {
        let assignment = Assignment::from_labels(labels)?;
        let value = objective_q1(&assignment, inst)?;
        let better = best.as_ref().is_none_or(|(v, _)| value < *v);
        if better {
            best = Some((value, assignment));
        }
    }
    let (q1_objective, assignment) = best.expect("n >= 1");
    let b_tilde = closed_form_b(&assignment, inst)?;
    let b_full = assignment.onehot().dot(&b_tilde);
    let predicted = predict(b_full.view());
    Ok(MapSolution { assignment, b_tilde, b_full, q1_objective, predicted })
}

/// Central-difference gradient of a scalar matrix function. The step for
/// entry (i, j) is `h * (1 + |at[i,j]|)`.
pub fn numeric_gradient<F>(f: F, at: &Array2<f64>, h: f64) -> Array2<f64>
where
    F: Fn(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(at.raw_dim());
    let mut probe = at.clone();
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let step = h * (1.0 + at[[i, j]].abs());
            let orig = at[[i, j]];
            probe[[i, j]] = orig + step;
            let up = f(&probe);
            probe[[i, j]] = orig - step;
            let down = f(&probe);
            probe[[i, j]] = orig;
            grad[[i, j]] = (up - down) / (2.0 * step);
        }
    }
    grad
}
