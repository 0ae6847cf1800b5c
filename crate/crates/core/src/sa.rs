//! Heat-bath simulated annealing over cluster labelings.
//!
//! The energy is the k-means cost plus a cut penalty, maintained
//! incrementally: per-cluster signal sums, counts and squared norms give the
//! fidelity change of a single-label move in O(d), and per-node neighbor
//! label counts give the cut change in O(1). Empty clusters are legal states
//! — that is how an overestimated k shrinks during cooling.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kmeans::derive_seed;
use crate::model::{Assignment, GtfSolution, SignalMatrix};

/// Geometric cooling schedule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
    /// Multiplicative cooling factor per temperature step.
    pub cool: f64,
    /// Full node sweeps per temperature.
    pub sweeps_per_temp: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { t_start: 100.0, t_end: 0.001, cool: 0.99, sweeps_per_temp: 1 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start > self.t_end && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need t_start > t_end > 0, got {} and {}",
                self.t_start, self.t_end
            )));
        }
        if !(self.cool > 0.0 && self.cool < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cooling factor must lie in (0,1), got {}",
                self.cool
            )));
        }
        if self.sweeps_per_temp == 0 {
            return Err(Error::InvalidParameter("sweeps_per_temp must be >= 1".into()));
        }
        Ok(())
    }
}

/// One energy sample along an annealing run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TracePoint {
    pub temperature: f64,
    /// Global sweep index.
    pub sweep: usize,
    pub energy: f64,
}

/// A labeling whose energy supports incremental single-site updates.
/// Implemented by the trend-filtering Hamiltonian here and by the
/// masked-label objective in the classification module.
pub trait SiteEnergy {
    fn num_sites(&self) -> usize;
    fn num_labels(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    /// Energy change of relabeling site i to t; exactly 0 for t == label(i).
    fn delta(&self, i: usize, t: usize) -> f64;
    fn apply(&mut self, i: usize, t: usize);
    fn energy(&self) -> f64;
}

/// Heat-bath transition probabilities from per-label energy changes, with
/// max-subtraction so large deltas never overflow. The result sums to one.
pub fn heat_bath_from_deltas(deltas: &[f64], temperature: f64) -> Vec<f64> {
    let inv_t = 1.0 / temperature;
    let exponents: Vec<f64> = deltas.iter().map(|d| -d * inv_t).collect();
    let m = exponents.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let weights: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Inverse-CDF (roulette-wheel) draw from a probability vector using a
/// single uniform sample.
fn roulette(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (t, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return t;
        }
    }
    probs.len() - 1
}

/// Run the cooling loop on any site energy. Per temperature, each sweep
/// visits the sites in a fresh random order and resamples every site's
/// label from the heat-bath distribution. Returns one trace point per
/// sweep. RNG consumption order: one shuffle then n roulette draws per
/// sweep.
pub fn heat_bath_anneal<M: SiteEnergy>(
    model: &mut M,
    schedule: &Schedule,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TracePoint>> {
    schedule.validate()?;
    let n = model.num_sites();
    let k = model.num_labels();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut temperature = schedule.t_start;
    let mut sweep = 0usize;
    let mut deltas = vec![0.0f64; k];
    while temperature >= schedule.t_end {
        for _ in 0..schedule.sweeps_per_temp {
            order.shuffle(rng);
            for &i in &order {
                for (t, d) in deltas.iter_mut().enumerate() {
                    *d = model.delta(i, t);
                }
                let probs = heat_bath_from_deltas(&deltas, temperature);
                let t = roulette(&probs, rng);
                if t != model.label(i) {
                    model.apply(i, t);
                }
            }
            trace.push(TracePoint { temperature, sweep, energy: model.energy() });
            sweep += 1;
        }
        temperature *= schedule.cool;
    }
    Ok(trace)
}

/// The annealing state for the trend-filtering energy
/// H = sum_i ||y_i - c_{label(i)}||^2 + cut_weight * (crossing-edge count),
/// with c the cluster means implied by the labels.
pub struct SaState<'a> {
    y: &'a SignalMatrix,
    g: &'a Graph,
    labels: Vec<usize>,
    k: usize,
    cut_weight: f64,
    cluster_sum: Array2<f64>,
    cluster_count: Vec<usize>,
    /// Per-cluster sum of ||y_i||^2.
    cluster_sq: Vec<f64>,
    /// neighbor_count[i][c]: neighbors of i currently labeled c.
    neighbor_count: Vec<Vec<usize>>,
    point_sq: Vec<f64>,
    energy: f64,
}

impl<'a> SaState<'a> {
    pub fn new(
        y: &'a SignalMatrix,
        g: &'a Graph,
        labels: Vec<usize>,
        k: usize,
        cut_weight: f64,
    ) -> Result<Self> {
        if y.n() != g.n() || labels.len() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "signal n={}, graph n={}, labels n={}",
                y.n(),
                g.n(),
                labels.len()
            )));
        }
        for &l in &labels {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
        }
        let n = g.n();
        let d = y.d();
        let point_sq: Vec<f64> =
            (0..n).map(|i| y.data().row(i).iter().map(|v| v * v).sum()).collect();
        let mut cluster_sum = Array2::zeros((k, d));
        let mut cluster_count = vec![0usize; k];
        let mut cluster_sq = vec![0.0f64; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = cluster_sum.row_mut(l);
            row += &y.data().row(i);
            cluster_count[l] += 1;
            cluster_sq[l] += point_sq[i];
        }
        let mut neighbor_count = vec![vec![0usize; k]; n];
        for &(i, j) in g.edges() {
            neighbor_count[i][labels[j]] += 1;
            neighbor_count[j][labels[i]] += 1;
        }
        let mut state = Self {
            y,
            g,
            labels,
            k,
            cut_weight,
            cluster_sum,
            cluster_count,
            cluster_sq,
            neighbor_count,
            point_sq,
            energy: 0.0,
        };
        state.energy = state.recompute_energy();
        Ok(state)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Fidelity cost of one cluster from its aggregates:
    /// sum ||y||^2 - ||S||^2 / count, zero when empty.
    fn cluster_cost(sq: f64, sum_sq_norm: f64, count: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            sq - sum_sq_norm / count as f64
        }
    }

    fn sum_sq_norm(&self, c: usize) -> f64 {
        self.cluster_sum.row(c).iter().map(|v| v * v).sum()
    }

    /// Recompute the energy from scratch; the incremental value must track
    /// this to tight absolute tolerance.
    pub fn recompute_energy(&self) -> f64 {
        let mut fit = 0.0;
        for c in 0..self.k {
            fit += Self::cluster_cost(self.cluster_sq[c], self.sum_sq_norm(c), self.cluster_count[c]);
        }
        let cut = self
            .g
            .edges()
            .iter()
            .filter(|&&(i, j)| self.labels[i] != self.labels[j])
            .count();
        fit + self.cut_weight * cut as f64
    }

    /// Heat-bath probabilities for resampling site i at a temperature.
    pub fn heat_bath_probabilities(&self, i: usize, temperature: f64) -> Vec<f64> {
        let deltas: Vec<f64> = (0..self.k).map(|t| self.delta(i, t)).collect();
        heat_bath_from_deltas(&deltas, temperature)
    }

    /// Bounds-checked energy change of relabeling node i to t.
    pub fn energy_delta(&self, i: usize, t: usize) -> Result<f64> {
        if i >= self.labels.len() {
            return Err(Error::IndexOutOfRange { index: i, n: self.labels.len() });
        }
        if t >= self.k {
            return Err(Error::LabelOutOfRange { label: t, k: self.k });
        }
        Ok(self.delta(i, t))
    }
}

impl SiteEnergy for SaState<'_> {
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
        let yi = self.y.data().row(i);
        let pi = self.point_sq[i];

        let s_count = self.cluster_count[s];
        let s_sum_sq = self.sum_sq_norm(s);
        let s_cost = Self::cluster_cost(self.cluster_sq[s], s_sum_sq, s_count);
        let s_sum_sq_after: f64 = self
            .cluster_sum
            .row(s)
            .iter()
            .zip(yi.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let s_cost_after =
            Self::cluster_cost(self.cluster_sq[s] - pi, s_sum_sq_after, s_count - 1);

        let t_count = self.cluster_count[t];
        let t_sum_sq = self.sum_sq_norm(t);
        let t_cost = Self::cluster_cost(self.cluster_sq[t], t_sum_sq, t_count);
        let t_sum_sq_after: f64 = self
            .cluster_sum
            .row(t)
            .iter()
            .zip(yi.iter())
            .map(|(a, b)| (a + b) * (a + b))
            .sum();
        let t_cost_after =
            Self::cluster_cost(self.cluster_sq[t] + pi, t_sum_sq_after, t_count + 1);

        let d_fit = s_cost_after + t_cost_after - s_cost - t_cost;
        let d_cut = self.neighbor_count[i][s] as f64 - self.neighbor_count[i][t] as f64;
        d_fit + self.cut_weight * d_cut
    }

    fn apply(&mut self, i: usize, t: usize) {
        let s = self.labels[i];
        if t == s {
            return;
        }
        let dh = self.delta(i, t);
        {
            let yi = self.y.data().row(i);
            let mut row = self.cluster_sum.row_mut(s);
            row -= &yi;
            let mut row = self.cluster_sum.row_mut(t);
            row += &yi;
        }
        self.cluster_count[s] -= 1;
        self.cluster_count[t] += 1;
        self.cluster_sq[s] -= self.point_sq[i];
        self.cluster_sq[t] += self.point_sq[i];
        for idx in 0..self.g.neighbors(i).len() {
            let j = self.g.neighbors(i)[idx];
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

/// The energy of a labeling: k-means cost around the implied cluster means
/// plus `lambda` times the crossing-edge count (each edge counted once;
/// the ordered-pair form of the same penalty is twice this value).
pub fn hamiltonian(
    y: &SignalMatrix,
    g: &Graph,
    labels: &[usize],
    lambda: f64,
    k: usize,
) -> Result<f64> {
    let state = SaState::new(y, g, labels.to_vec(), k, lambda)?;
    Ok(state.recompute_energy())
}

/// Result of an annealing run.
#[derive(Debug)]
pub struct AnnealResult {
    pub solution: GtfSolution,
    pub trace: Vec<TracePoint>,
    /// Final annealed energy, equal to twice the reported objective.
    pub final_energy: f64,
}

/// Anneal the labeling starting from `k` clusters (intended as an
/// overestimate; cooling empties the surplus). `lambda` is the same penalty
/// weight the other solvers take; the annealed energy is
/// ||Y - X mu||_F^2 + 2 lambda cut = 2 x (reported objective), so both
/// solvers minimize the same thing. Deterministic given the seed: the
/// stream is consumed by the initial labeling, then per sweep one shuffle
/// and n roulette draws.
pub fn anneal(
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k: usize,
    schedule: &Schedule,
    seed: u64,
) -> Result<AnnealResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..g.n()).map(|_| rng.random_range(0..k)).collect();
    let mut state = SaState::new(y, g, labels, k, 2.0 * lambda)?;
    let trace = heat_bath_anneal(&mut state, schedule, &mut rng)?;
    let final_energy = state.energy();
    let assignment = Assignment::new(state.labels().to_vec(), k)?;
    let solution = GtfSolution::from_assignment(y, g, lambda, &assignment)?;
    Ok(AnnealResult { solution, trace, final_energy })
}

/// Independent annealing restarts reduced by final energy (ties keep the
/// earliest restart). Restart r runs with seed derived from (seed, r).
pub fn anneal_restarts(
    y: &SignalMatrix,
    g: &Graph,
    lambda: f64,
    k: usize,
    schedule: &Schedule,
    seed: u64,
    restarts: usize,
) -> Result<AnnealResult> {
    let restarts = restarts.max(1);
    let runs: Vec<Result<AnnealResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| anneal(y, g, lambda, k, schedule, derive_seed(seed, r as u64)))
        .collect();
    let mut best: Option<AnnealResult> = None;
    for run in runs {
        let run = run?;
        let better = best.as_ref().is_none_or(|b| run.final_energy < b.final_energy);
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
