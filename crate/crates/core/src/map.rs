//! Transductive classification as trend filtering: fit class scores that
//! match the observed one-hot labels, stay close to a prior, and change
//! across few graph edges.
//!
//! The score matrix restricted to a partition has a per-cluster closed form,
//! so solving reduces to searching over partitions with the same spectral
//! and annealing machinery as the signal solvers.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kmeans::derive_seed;
use crate::model::{l20_penalty, Assignment, SignalMatrix};
use crate::sa::{heat_bath_anneal, Schedule, SiteEnergy};
use crate::spectral::SpectralOpts;

/// A masked-label problem instance.
///
/// `y_onehot` rows are one-hot for observed samples and all-zero otherwise;
/// `mask` marks the observed rows; `prior` is a nonnegative per-class prior.
#[derive(Clone, Debug)]
pub struct MapInstance {
    graph: Graph,
    y_onehot: Array2<f64>,
    mask: Vec<bool>,
    prior: Array2<f64>,
    pub lambda: f64,
    pub epsilon: f64,
}

impl MapInstance {
    pub fn new(
        graph: Graph,
        y_onehot: Array2<f64>,
        mask: Vec<bool>,
        prior: Option<Array2<f64>>,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let n = graph.n();
        let num_classes = y_onehot.ncols();
        if y_onehot.nrows() != n || mask.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "graph n={n}, labels {}x{}, mask {}",
                y_onehot.nrows(),
                num_classes,
                mask.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::InvalidParameter("need at least two classes".into()));
        }
        if lambda < 0.0 || epsilon < 0.0 {
            return Err(Error::InvalidParameter(
                "lambda and epsilon must be nonnegative".into(),
            ));
        }
        for (i, row) in y_onehot.rows().into_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones + zeros != num_classes {
                return Err(Error::InvalidParameter(format!(
                    "label row {i} is not 0/1"
                )));
            }
            let expect = usize::from(mask[i]);
            if ones != expect {
                return Err(Error::InvalidParameter(format!(
                    "label row {i} must have exactly {expect} ones"
                )));
            }
        }
        let prior = match prior {
            Some(r) => {
                if r.nrows() != n || r.ncols() != num_classes {
                    return Err(Error::DimensionMismatch(format!(
                        "prior is {}x{}, expected {n}x{num_classes}",
                        r.nrows(),
                        r.ncols()
                    )));
                }
                if r.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                    return Err(Error::InvalidParameter("prior must be nonnegative".into()));
                }
                r
            }
            // Uniform prior 1/K by default.
            None => Array2::from_elem((n, num_classes), 1.0 / num_classes as f64),
        };
        Ok(Self { graph, y_onehot, mask, prior, lambda, epsilon })
    }

    /// Build from integer class labels with -1 marking unobserved samples.
    pub fn from_labels(
        graph: Graph,
        labels: &[i64],
        num_classes: Option<usize>,
        prior: Option<Array2<f64>>,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let n = graph.n();
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "graph n={n}, labels {}",
                labels.len()
            )));
        }
        let observed_max = labels.iter().copied().filter(|&l| l >= 0).max();
        let k = match (num_classes, observed_max) {
            (Some(k), _) => k,
            (None, Some(m)) => (m as usize + 1).max(2),
            (None, None) => {
                return Err(Error::InvalidParameter("no observed labels".into()))
            }
        };
        let mut y = Array2::zeros((n, k));
        let mut mask = vec![false; n];
        for (i, &l) in labels.iter().enumerate() {
            if l < 0 {
                continue;
            }
            let l = l as usize;
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
            y[[i, l]] = 1.0;
            mask[i] = true;
        }
        Self::new(graph, y, mask, prior, lambda, epsilon)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn y_onehot(&self) -> &Array2<f64> {
        &self.y_onehot
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn prior(&self) -> &Array2<f64> {
        &self.prior
    }

    pub fn num_classes(&self) -> usize {
        self.y_onehot.ncols()
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Solver output: the partition, per-cluster class scores, the expanded
/// per-node scores and the argmax predictions.
#[derive(Clone, Debug)]
pub struct MapSolution {
    pub assignment: Assignment,
    /// k x K per-cluster class scores.
    pub b_tilde: Array2<f64>,
    /// n x K per-node scores, X * b_tilde.
    pub b_full: Array2<f64>,
    pub q1_objective: f64,
    pub predicted: Vec<usize>,
}

impl MapSolution {
    /// Wire format: `{predicted, k, q1_objective, per_class_counts}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let num_classes = self.b_tilde.ncols();
        let mut counts = vec![0usize; num_classes];
        for &p in &self.predicted {
            counts[p] += 1;
        }
        serde_json::json!({
            "predicted": self.predicted,
            "k": self.assignment.k(),
            "q1_objective": self.q1_objective,
            "per_class_counts": counts,
        })
    }
}

/// The raw objective on an arbitrary score matrix:
/// (1/2)||M(Y - B)||_F^2 + lambda L(B) + epsilon ||R - B||_F^2.
pub fn objective_q(b: ArrayView2<'_, f64>, inst: &MapInstance, tol: f64) -> Result<f64> {
    let n = inst.n();
    let k = inst.num_classes();
    if b.nrows() != n || b.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "scores are {}x{}, expected {n}x{k}",
            b.nrows(),
            b.ncols()
        )));
    }
    let mut masked_fit = 0.0;
    let mut prior_fit = 0.0;
    for i in 0..n {
        let br = b.row(i);
        if inst.mask[i] {
            masked_fit += inst
                .y_onehot
                .row(i)
                .iter()
                .zip(br.iter())
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>();
        }
        prior_fit += inst
            .prior
            .row(i)
            .iter()
            .zip(br.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>();
    }
    let penalty = l20_penalty(b, &inst.graph, tol)? as f64;
    Ok(0.5 * masked_fit + inst.lambda * penalty + inst.epsilon * prior_fit)
}

/// Per-cluster aggregates of an instance under an assignment.
struct ClusterAggregates {
    count: Vec<usize>,
    masked_count: Vec<usize>,
    masked_y_sum: Array2<f64>,
    prior_sum: Array2<f64>,
}

fn aggregates(x: &Assignment, inst: &MapInstance) -> ClusterAggregates {
    let k = x.k();
    let num_classes = inst.num_classes();
    let mut agg = ClusterAggregates {
        count: vec![0; k],
        masked_count: vec![0; k],
        masked_y_sum: Array2::zeros((k, num_classes)),
        prior_sum: Array2::zeros((k, num_classes)),
    };
    for (i, &l) in x.labels().iter().enumerate() {
        agg.count[l] += 1;
        if inst.mask[i] {
            agg.masked_count[l] += 1;
            let mut row = agg.masked_y_sum.row_mut(l);
            row += &inst.y_onehot.row(i);
        }
        let mut row = agg.prior_sum.row_mut(l);
        row += &inst.prior.row(i);
    }
    agg
}

/// Minimizer of the objective restricted to cluster-constant scores: row c
/// solves (m_c + 2 epsilon n_c) b_c = sum of masked labels + 2 epsilon sum
/// of priors, the stationary point of the restricted quadratic. (The
/// alternative normalization (m_c + n_c) with a single epsilon on the prior
/// sum is kept in [`closed_form_b_literal`] for comparison reports; it does
/// not satisfy stationarity.)
pub fn closed_form_b(x: &Assignment, inst: &MapInstance) -> Result<Array2<f64>> {
    check_assignment(x, inst)?;
    let agg = aggregates(x, inst);
    let mut b = Array2::zeros((x.k(), inst.num_classes()));
    for c in 0..x.k() {
        if agg.count[c] == 0 {
            return Err(Error::EmptyCluster(c));
        }
        let denom = agg.masked_count[c] as f64 + 2.0 * inst.epsilon * agg.count[c] as f64;
        if denom == 0.0 {
            return Err(Error::SingularSystem(format!(
                "cluster {c} has no observed labels and epsilon = 0"
            )));
        }
        for j in 0..inst.num_classes() {
            b[[c, j]] = (agg.masked_y_sum[[c, j]] + 2.0 * inst.epsilon * agg.prior_sum[[c, j]])
                / denom;
        }
    }
    Ok(b)
}

/// The transcription with denominator (m_c + n_c) and a single epsilon
/// weight on the prior. Retained only so callers can report how far it
/// falls from the stationary solution; not used by the solvers.
pub fn closed_form_b_literal(x: &Assignment, inst: &MapInstance) -> Result<Array2<f64>> {
    check_assignment(x, inst)?;
    let agg = aggregates(x, inst);
    let mut b = Array2::zeros((x.k(), inst.num_classes()));
    for c in 0..x.k() {
        if agg.count[c] == 0 {
            return Err(Error::EmptyCluster(c));
        }
        let denom = (agg.masked_count[c] + agg.count[c]) as f64;
        for j in 0..inst.num_classes() {
            b[[c, j]] =
                (agg.masked_y_sum[[c, j]] + inst.epsilon * agg.prior_sum[[c, j]]) / denom;
        }
    }
    Ok(b)
}

/// Frobenius distance between the stationary and literal per-cluster
/// solutions, for divergence reports.
pub fn closed_form_divergence(x: &Assignment, inst: &MapInstance) -> Result<f64> {
    let a = closed_form_b(x, inst)?;
    let b = closed_form_b_literal(x, inst)?;
    Ok(a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
}

fn check_assignment(x: &Assignment, inst: &MapInstance) -> Result<()> {
    if x.n() != inst.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment n={}, instance n={}",
            x.n(),
            inst.n()
        )));
    }
    Ok(())
}

/// The partition objective: masked fidelity and prior fit at the refit
/// cluster scores, plus lambda Tr(X^T L X). The trace term is twice the
/// crossing-edge count; that factor is kept as written, so the edge penalty
/// here is 2 lambda per crossing edge.
pub fn objective_q1(x: &Assignment, inst: &MapInstance) -> Result<f64> {
    let b_tilde = closed_form_b(x, inst)?;
    let mut value = cluster_fit_cost(inst, x, &b_tilde);
    value += inst.lambda * 2.0 * x.cut_size(&inst.graph) as f64;
    Ok(value)
}

fn cluster_fit_cost(inst: &MapInstance, x: &Assignment, b_tilde: &Array2<f64>) -> f64 {
    // Expand through per-node rows; exactness matters more than speed here
    // and the SA path keeps its own aggregate form.
    let mut masked_fit = 0.0;
    let mut prior_fit = 0.0;
    for (i, &l) in x.labels().iter().enumerate() {
        let bc = b_tilde.row(l);
        if inst.mask[i] {
            masked_fit += inst
                .y_onehot
                .row(i)
                .iter()
                .zip(bc.iter())
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>();
        }
        prior_fit += inst
            .prior
            .row(i)
            .iter()
            .zip(bc.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>();
    }
    0.5 * masked_fit + inst.epsilon * prior_fit
}

/// Row-argmax class readout; ties go to the smaller class index.
pub fn predict(b_full: ArrayView2<'_, f64>) -> Vec<usize> {
    b_full
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_v = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Which search drives the outer partition problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapMethod {
    Spectral,
    Sa,
}

/// Options for [`solve_map`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MapOpts {
    pub spectral: SpectralOpts,
    pub schedule: Schedule,
    pub sa_restarts: usize,
}

impl Default for MapOpts {
    fn default() -> Self {
        Self { spectral: SpectralOpts::default(), schedule: Schedule::default(), sa_restarts: 1 }
    }
}

/// Solve the masked-label problem over partitions with up to `k_max`
/// clusters.
///
/// The spectral route clusters a surrogate signal that stacks the masked
/// labels with the epsilon-weighted prior, screens k = 1..k_max, and
/// rescores every candidate with the exact partition objective. The
/// annealing route resamples labels under the partition objective computed
/// incrementally per move.
pub fn solve_map(
    inst: &MapInstance,
    k_max: usize,
    method: MapMethod,
    opts: &MapOpts,
) -> Result<MapSolution> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let k_max = k_max.min(inst.n());
    let assignment = match method {
        MapMethod::Spectral => {
            let candidates = spectral_candidates(inst, k_max, opts)?;
            let mut best: Option<(f64, Assignment)> = None;
            let mut last_err = None;
            for cand in candidates {
                match objective_q1(&cand, inst) {
                    Ok(v) => {
                        let better = best.as_ref().is_none_or(|(b, _)| v < *b);
                        if better {
                            best = Some((v, cand));
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            match best {
                Some((_, a)) => a,
                None => return Err(last_err.unwrap_or(Error::InvalidParameter(
                    "no feasible candidate".into(),
                ))),
            }
        }
        MapMethod::Sa => anneal_assignment(inst, k_max, opts)?,
    };

    let b_tilde = closed_form_b(&assignment, inst)?;
    let b_full = assignment.onehot().dot(&b_tilde);
    let q1_objective = objective_q1(&assignment, inst)?;
    let predicted = predict(b_full.view());
    Ok(MapSolution { assignment, b_tilde, b_full, q1_objective, predicted })
}

/// Candidate partitions from screening the surrogate signal
/// [y-masked ; sqrt(epsilon) prior]. The surrogate's penalty weight is
/// doubled so its cut term matches the partition objective's 2 lambda.
fn spectral_candidates(
    inst: &MapInstance,
    k_max: usize,
    opts: &MapOpts,
) -> Result<Vec<Assignment>> {
    let n = inst.n();
    let num_classes = inst.num_classes();
    let mut surrogate = Array2::zeros((n, 2 * num_classes));
    let eps_w = inst.epsilon.sqrt();
    for i in 0..n {
        if inst.mask[i] {
            for j in 0..num_classes {
                surrogate[[i, j]] = inst.y_onehot[[i, j]];
            }
        }
        for j in 0..num_classes {
            surrogate[[i, num_classes + j]] = eps_w * inst.prior[[i, j]];
        }
    }
    let y = SignalMatrix::new(surrogate)?;
    // Rescoring needs every per-k candidate, not just the screen winner.
    let embedder = crate::spectral::Embedder::new(&y, &inst.graph, k_max)?;
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let sub = SpectralOpts {
            seed: derive_seed(opts.spectral.seed, k as u64),
            ..opts.spectral.clone()
        };
        let sol = crate::spectral::solve_fixed_k_with(
            &embedder,
            &y,
            &inst.graph,
            2.0 * inst.lambda,
            k,
            &sub,
        )?;
        out.push(sol.assignment);
    }
    Ok(out)
}

fn anneal_assignment(inst: &MapInstance, k_max: usize, opts: &MapOpts) -> Result<Assignment> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..opts.sa_restarts.max(1) {
        let seed = derive_seed(opts.spectral.seed, 0x5A00 + restart as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..inst.n()).map(|_| rng.random_range(0..k_max)).collect();
        let mut state = MapSaState::new(inst, labels, k_max)?;
        heat_bath_anneal(&mut state, &opts.schedule, &mut rng)?;
        let energy = state.energy();
        let better = best.as_ref().is_none_or(|(b, _)| energy < *b);
        if better {
            best = Some((energy, state.labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    Ok(Assignment::new(labels, k_max)?.compact())
}

/// Incremental state for annealing the partition objective: per-cluster
/// counts, masked label sums and prior sums determine each cluster's refit
/// score row and cost in O(K).
struct MapSaState<'a> {
    inst: &'a MapInstance,
    labels: Vec<usize>,
    k: usize,
    count: Vec<usize>,
    masked_count: Vec<usize>,
    masked_y_sum: Array2<f64>,
    prior_sum: Array2<f64>,
    masked_y_sq: Vec<f64>,
    prior_sq: Vec<f64>,
    neighbor_count: Vec<Vec<usize>>,
    point_y_sq: Vec<f64>,
    point_r_sq: Vec<f64>,
    energy: f64,
}

impl<'a> MapSaState<'a> {
    fn new(inst: &'a MapInstance, labels: Vec<usize>, k: usize) -> Result<Self> {
        let n = inst.n();
        for &l in &labels {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
        }
        let num_classes = inst.num_classes();
        let point_y_sq: Vec<f64> = (0..n)
            .map(|i| {
                if inst.mask[i] {
                    inst.y_onehot.row(i).iter().map(|v| v * v).sum()
                } else {
                    0.0
                }
            })
            .collect();
        let point_r_sq: Vec<f64> =
            (0..n).map(|i| inst.prior.row(i).iter().map(|v| v * v).sum()).collect();

        let mut state = Self {
            inst,
            labels,
            k,
            count: vec![0; k],
            masked_count: vec![0; k],
            masked_y_sum: Array2::zeros((k, num_classes)),
            prior_sum: Array2::zeros((k, num_classes)),
            masked_y_sq: vec![0.0; k],
            prior_sq: vec![0.0; k],
            neighbor_count: vec![vec![0; k]; n],
            point_y_sq,
            point_r_sq,
            energy: 0.0,
        };
        for i in 0..n {
            let l = state.labels[i];
            state.count[l] += 1;
            if inst.mask[i] {
                state.masked_count[l] += 1;
                let mut row = state.masked_y_sum.row_mut(l);
                row += &inst.y_onehot.row(i);
            }
            let mut row = state.prior_sum.row_mut(l);
            row += &inst.prior.row(i);
            state.masked_y_sq[l] += state.point_y_sq[i];
            state.prior_sq[l] += state.point_r_sq[i];
        }
        for &(i, j) in inst.graph.edges() {
            state.neighbor_count[i][state.labels[j]] += 1;
            state.neighbor_count[j][state.labels[i]] += 1;
        }
        state.energy = state.recompute_energy();
        Ok(state)
    }

    /// Refit cost of one cluster from aggregates. Clusters whose refit is
    /// ill-posed (empty, or unlabeled with epsilon = 0) cost zero.
    fn cost_from(
        &self,
        count: usize,
        masked_count: usize,
        y_sum: &[f64],
        r_sum: &[f64],
        y_sq: f64,
        r_sq: f64,
    ) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let eps = self.inst.epsilon;
        let denom = masked_count as f64 + 2.0 * eps * count as f64;
        if denom == 0.0 {
            return 0.0;
        }
        let mut dot_y = 0.0;
        let mut dot_r = 0.0;
        let mut norm_b = 0.0;
        for j in 0..y_sum.len() {
            let b = (y_sum[j] + 2.0 * eps * r_sum[j]) / denom;
            dot_y += y_sum[j] * b;
            dot_r += r_sum[j] * b;
            norm_b += b * b;
        }
        0.5 * (y_sq - 2.0 * dot_y + masked_count as f64 * norm_b)
            + eps * (r_sq - 2.0 * dot_r + count as f64 * norm_b)
    }

    fn cluster_cost(&self, c: usize) -> f64 {
        self.cost_from(
            self.count[c],
            self.masked_count[c],
            self.masked_y_sum.row(c).as_slice().unwrap(),
            self.prior_sum.row(c).as_slice().unwrap(),
            self.masked_y_sq[c],
            self.prior_sq[c],
        )
    }

    fn recompute_energy(&self) -> f64 {
        let fit: f64 = (0..self.k).map(|c| self.cluster_cost(c)).sum();
        let cut = self
            .inst
            .graph
            .edges()
            .iter()
            .filter(|&&(i, j)| self.labels[i] != self.labels[j])
            .count();
        fit + 2.0 * self.inst.lambda * cut as f64
    }
}

impl SiteEnergy for MapSaState<'_> {
    fn num_sites(&self) -> usize {
        self.labels.len()
    }

    fn num_labels(&self) -> usize {
        self.k
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    fn delta(&self, i: usize, t: usize) -> f64 {
        let s = self.labels[i];
        if t == s {
            return 0.0;
        }
        let num_classes = self.inst.num_classes();
        let masked = self.inst.mask[i];
        let yi = self.inst.y_onehot.row(i);
        let ri = self.inst.prior.row(i);

        let mut s_y = self.masked_y_sum.row(s).to_vec();
        let mut s_r = self.prior_sum.row(s).to_vec();
        let mut t_y = self.masked_y_sum.row(t).to_vec();
        let mut t_r = self.prior_sum.row(t).to_vec();
        for j in 0..num_classes {
            if masked {
                s_y[j] -= yi[j];
                t_y[j] += yi[j];
            }
            s_r[j] -= ri[j];
            t_r[j] += ri[j];
        }
        let dm = usize::from(masked);
        let s_after = self.cost_from(
            self.count[s] - 1,
            self.masked_count[s] - dm,
            &s_y,
            &s_r,
            self.masked_y_sq[s] - self.point_y_sq[i],
            self.prior_sq[s] - self.point_r_sq[i],
        );
        let t_after = self.cost_from(
            self.count[t] + 1,
            self.masked_count[t] + dm,
            &t_y,
            &t_r,
            self.masked_y_sq[t] + self.point_y_sq[i],
            self.prior_sq[t] + self.point_r_sq[i],
        );
        let d_fit = s_after + t_after - self.cluster_cost(s) - self.cluster_cost(t);
        let d_cut = self.neighbor_count[i][s] as f64 - self.neighbor_count[i][t] as f64;
        d_fit + 2.0 * self.inst.lambda * d_cut
    }

    fn apply(&mut self, i: usize, t: usize) {
        let s = self.labels[i];
        if t == s {
            return;
        }
        let dh = self.delta(i, t);
        let masked = self.inst.mask[i];
        {
            let yi = self.inst.y_onehot.row(i);
            let ri = self.inst.prior.row(i);
            if masked {
                let mut row = self.masked_y_sum.row_mut(s);
                row -= &yi;
                let mut row = self.masked_y_sum.row_mut(t);
                row += &yi;
            }
            let mut row = self.prior_sum.row_mut(s);
            row -= &ri;
            let mut row = self.prior_sum.row_mut(t);
            row += &ri;
        }
        self.count[s] -= 1;
        self.count[t] += 1;
        if masked {
            self.masked_count[s] -= 1;
            self.masked_count[t] += 1;
        }
        self.masked_y_sq[s] -= self.point_y_sq[i];
        self.masked_y_sq[t] += self.point_y_sq[i];
        self.prior_sq[s] -= self.point_r_sq[i];
        self.prior_sq[t] += self.point_r_sq[i];
        for idx in 0..self.inst.graph.neighbors(i).len() {
            let j = self.inst.graph.neighbors(i)[idx];
            self.neighbor_count[j][s] -= 1;
            self.neighbor_count[j][t] += 1;
        }
        self.labels[i] = t;
        self.energy += dh;
    }

    fn energy(&self) -> f64 {
        self.energy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::planted_partition;
    use crate::oracle::{brute_force_q1, numeric_gradient};
    use ndarray::array;

    fn tiny_instance(seed: u64, epsilon: f64) -> MapInstance {
        let pp = planted_partition(&[3, 3], 0.9, 0.3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(900, seed));
        let labels: Vec<i64> = (0..6)
            .map(|i| {
                if rng.random::<f64>() < 0.6 {
                    (i / 3) as i64
                } else {
                    -1
                }
            })
            .collect();
        // Guarantee at least one observation.
        let mut labels = labels;
        labels[0] = 0;
        MapInstance::from_labels(pp.graph, &labels, Some(2), None, 0.2, epsilon).unwrap()
    }

    #[test]
    fn instance_validation() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        // Unmasked rows must be all-zero.
        let y = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let bad_mask = vec![true, false, false];
        assert!(MapInstance::new(g.clone(), y.clone(), bad_mask, None, 0.1, 0.01).is_err());
        let ok = MapInstance::new(g, y, vec![true, true, false], None, 0.1, 0.01).unwrap();
        assert_eq!(ok.num_classes(), 2);
        assert!((ok.prior()[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn objective_q_trivial_zero() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let y = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let inst = MapInstance::new(
            g,
            y.clone(),
            vec![true, true, true],
            Some(y.clone()),
            0.5,
            0.3,
        )
        .unwrap();
        assert_eq!(objective_q(y.view(), &inst, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_identity_cases() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let y = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];

        // Fully observed, epsilon = 0, singleton clusters: scores equal the
        // labels.
        let inst =
            MapInstance::new(g.clone(), y.clone(), vec![true; 3], None, 0.1, 0.0).unwrap();
        let x = Assignment::new(vec![0, 1, 2], 3).unwrap();
        let b = closed_form_b(&x, &inst).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!((b[[i, j]] - y[[i, j]]).abs() < 1e-12);
            }
        }
        // The alternative normalization lands at half the labels here.
        let lit = closed_form_b_literal(&x, &inst).unwrap();
        assert!((lit[[0, 0]] - 0.5).abs() < 1e-12);

        // Nothing observed, epsilon > 0: scores equal the prior.
        let zero = Array2::zeros((3, 2));
        let prior = array![[0.3, 0.7], [0.1, 0.9], [0.8, 0.2]];
        let inst2 = MapInstance::new(g, zero, vec![false; 3], Some(prior.clone()), 0.1, 0.4)
            .unwrap();
        let b2 = closed_form_b(&x, &inst2).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!((b2[[i, j]] - prior[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_singular_when_unlabeled_and_eps_zero() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let y = array![[1.0, 0.0], [0.0, 0.0]];
        let inst = MapInstance::new(g, y, vec![true, false], None, 0.1, 0.0).unwrap();
        let x = Assignment::new(vec![0, 1], 2).unwrap();
        assert!(matches!(
            closed_form_b(&x, &inst).unwrap_err(),
            Error::SingularSystem(_)
        ));
    }

    #[test]
    fn closed_form_is_stationary() {
        for seed in 0..20 {
            let inst = tiny_instance(seed, 0.05);
            let x = Assignment::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
            let b_tilde = closed_form_b(&x, &inst).unwrap();
            let f = |bt: &Array2<f64>| -> f64 {
                let b_full = x.onehot().dot(bt);
                objective_q(b_full.view(), &inst, 0.0).unwrap()
            };
            let grad = numeric_gradient(f, &b_tilde, 1e-5);
            let norm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1e-6, "gradient norm {norm} at seed {seed}");
        }
    }

    #[test]
    fn q_and_q1_agree_through_the_cut_bridge() {
        // Q1(X) replaces the count of score-differing edges with
        // Tr(X^T L X) = 2 cut(X); enumerate everything on a small instance.
        for seed in 0..5 {
            let inst = tiny_instance(seed, 0.05);
            for labels in crate::oracle::enumerate_partitions(6).unwrap() {
                let x = Assignment::from_labels(labels).unwrap();
                let b_tilde = closed_form_b(&x, &inst).unwrap();
                let b_full = x.onehot().dot(&b_tilde);
                let q = objective_q(b_full.view(), &inst, 0.0).unwrap();
                let l_b = l20_penalty(b_full.view(), inst.graph(), 0.0).unwrap() as f64;
                let bridged = q - inst.lambda * l_b
                    + inst.lambda * 2.0 * x.cut_size(inst.graph()) as f64;
                let q1 = objective_q1(&x, &inst).unwrap();
                let rel = (bridged - q1).abs() / q1.abs().max(1.0);
                assert!(rel < 1e-10, "bridge broke: {bridged} vs {q1}");
            }
        }
    }

    #[test]
    fn predict_ties_and_argmax() {
        let b = array![[0.2, 0.7, 0.1], [0.5, 0.5, 0.0], [0.0, 0.1, 0.9]];
        assert_eq!(predict(b.view()), vec![1, 0, 2]);
    }

    #[test]
    fn fully_observed_identity_recovers_labels() {
        let pp = planted_partition(&[4, 4], 0.9, 0.3, 11).unwrap();
        let labels: Vec<i64> = (0..8).map(|i| (i / 4) as i64).collect();
        let inst =
            MapInstance::from_labels(pp.graph, &labels, Some(2), None, 0.0, 0.0).unwrap();
        let sol = solve_map(&inst, 8, MapMethod::Spectral, &MapOpts::default()).unwrap();
        let truth: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        assert_eq!(sol.predicted, truth);
    }

    #[test]
    fn sa_and_enumeration_agree_on_tiny_instances() {
        let mut hits = 0;
        for seed in 0..10 {
            let inst = tiny_instance(seed, 0.05);
            let oracle = brute_force_q1(&inst).unwrap();
            let opts = MapOpts {
                schedule: Schedule {
                    t_start: 20.0,
                    t_end: 0.001,
                    cool: 0.98,
                    sweeps_per_temp: 1,
                },
                sa_restarts: 3,
                ..Default::default()
            };
            let sol = solve_map(&inst, 6, MapMethod::Sa, &opts).unwrap();
            if (sol.q1_objective - oracle.q1_objective).abs()
                <= 1e-8 * oracle.q1_objective.abs().max(1.0)
            {
                hits += 1;
            }
        }
        assert!(hits >= 9, "SA matched the oracle on only {hits}/10 instances");
    }

    #[test]
    fn ground_truth_partition_beats_random_partitions() {
        let pp = planted_partition(&[8, 8], 0.8, 0.1, 33).unwrap();
        let g = pp.graph.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels: Vec<i64> = (0..16)
            .map(|i| if rng.random::<f64>() < 0.3 { (i / 8) as i64 } else { -1 })
            .collect();
        let mut labels = labels;
        labels[0] = 0;
        labels[8] = 1;
        let inst = MapInstance::from_labels(g, &labels, Some(2), None, 0.2, 0.01).unwrap();
        let truth = Assignment::new(pp.labels.clone(), 2).unwrap();
        let truth_q1 = objective_q1(&truth, &inst).unwrap();
        for _ in 0..50 {
            let k = rng.random_range(2..=4);
            let rand_labels: Vec<usize> = (0..16).map(|_| rng.random_range(0..k)).collect();
            let x = Assignment::new(rand_labels, k).unwrap().compact();
            let v = objective_q1(&x, &inst).unwrap();
            assert!(truth_q1 <= v + 1e-9, "random partition beat the truth: {v} < {truth_q1}");
        }
    }

    #[test]
    fn map_sa_state_incremental_matches_recompute() {
        let inst = tiny_instance(3, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
        let mut state = MapSaState::new(&inst, labels, 3).unwrap();
        for _ in 0..500 {
            let i = rng.random_range(0..6);
            let t = rng.random_range(0..3);
            let before = state.recompute_energy();
            let d = state.delta(i, t);
            state.apply(i, t);
            let after = state.recompute_energy();
            assert!((after - before - d).abs() < 1e-8);
            assert!((state.energy() - after).abs() < 1e-6);
        }
    }

    #[test]
    fn growing_mask_never_shrinks_refit_fidelity() {
        // Each extra observation adds a nonnegative residual at the refit
        // optimum, so total masked fidelity is monotone nondecreasing.
        let pp = planted_partition(&[4, 4], 0.9, 0.2, 5).unwrap();
        let x = Assignment::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let full: Vec<i64> = (0..8).map(|_| rng.random_range(0..2i64)).collect();
        let mut prev = 0.0;
        for observed in 1..=8 {
            let labels: Vec<i64> =
                (0..8).map(|i| if i < observed { full[i] } else { -1 }).collect();
            let inst = MapInstance::from_labels(
                pp.graph.clone(),
                &labels,
                Some(2),
                None,
                0.0,
                0.01,
            )
            .unwrap();
            let b_tilde = closed_form_b(&x, &inst).unwrap();
            let b_full = x.onehot().dot(&b_tilde);
            let mut fid = 0.0;
            for i in 0..8 {
                if inst.mask()[i] {
                    fid += inst
                        .y_onehot()
                        .row(i)
                        .iter()
                        .zip(b_full.row(i).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
            assert!(fid >= prev - 1e-12, "fidelity dropped: {fid} < {prev}");
            prev = fid;
        }
    }
}
