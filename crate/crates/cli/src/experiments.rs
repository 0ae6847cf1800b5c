//! The reproduction experiments: boundary-edge recovery sweeps, denoising
//! SNR curves, solver timing across edge densities, and repeated-trial
//! semi-supervised classification.

use std::time::Instant;

use gtf_core::graph::{knn_graph, planted_partition, Graph};
use gtf_core::kmeans::derive_seed;
use gtf_core::map::{solve_map, MapInstance, MapMethod, MapOpts};
use gtf_core::model::boundary_edges;
use gtf_core::sa::anneal_restarts;
use gtf_core::spectral::{solve_screen_with, Embedder};
use gtf_core::SignalMatrix;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Method, RunConfig};
use crate::datasets::{
    gaussian_blobs, noisy_realizations, piecewise_signal, replicate_columns, sample_mask,
};
use crate::error::{HarnessError, Result};
use crate::metrics::{input_snr_db, recon_snr_db, roc_curve, sigma2_for_input_snr};
use crate::report::{fmt_num, mean, std_dev, variance, ExperimentReport};

/// Score every edge by the largest penalty at which it is still reported as
/// a boundary by the screening solver. Edges never reported score zero,
/// which ranks them below every grid point.
pub fn persistence_scores(
    y: &SignalMatrix,
    g: &Graph,
    lambda_grid: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<f64>> {
    let embedder = Embedder::new(y, g, cfg.k_max)?;
    let opts = cfg.spectral_opts();
    let per_lambda: Vec<Result<Vec<(usize, usize)>>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let res = solve_screen_with(&embedder, y, g, lambda, cfg.k_max, &opts)?;
            Ok(boundary_edges(res.solution.reconstruction.view(), g, 0.0)?)
        })
        .collect();

    let mut scores = vec![0.0f64; g.edge_count()];
    for (idx, found) in per_lambda.into_iter().enumerate() {
        let lambda = lambda_grid[idx];
        for e in found? {
            let pos = g.edges().binary_search(&e).expect("boundary edge is a graph edge");
            if lambda > scores[pos] {
                scores[pos] = lambda;
            }
        }
    }
    Ok(scores)
}

/// Boundary-edge recovery: plant communities, add noise at the target input
/// SNR, sweep the penalty, and trace an ROC of persistence scores against
/// the true inter-community boundaries.
pub fn run_support_recovery(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = cfg.roc_lambda_grid();
    let mut report = ExperimentReport::new(cfg);
    let mut aucs = Vec::with_capacity(cfg.seeds);

    for rep in 0..cfg.seeds.max(1) {
        let pp = planted_partition(&cfg.sizes, cfg.p, cfg.q, derive_seed(cfg.seed, rep as u64))?;
        let y_star = piecewise_signal(&pp.labels, &cfg.signal_values);
        let y_star_mat = SignalMatrix::new(replicate_columns(&y_star, cfg.d))?;
        let sigma2 = match cfg.input_snr_db {
            Some(target) => sigma2_for_input_snr(&y_star_mat, target)?,
            None => cfg.sigma2,
        };
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x1000 + rep as u64));
        let y = noisy_realizations(&y_star, cfg.d, sigma2, &mut rng);

        let truth: Vec<bool> =
            pp.graph.edges().iter().map(|&(i, j)| y_star[i] != y_star[j]).collect();
        let scores = persistence_scores(&y, &pp.graph, &grid, cfg)?;
        let roc = roc_curve(&scores, &truth)?;
        report.metric(format!("auc_seed_{rep}"), roc.auc);
        aucs.push(roc.auc);

        if rep == 0 {
            report.metric("input_snr_db", input_snr_db(&y_star_mat, sigma2)?);
            report.metric("sigma2", sigma2);
            report.curve("roc", roc.points);
        }
    }
    report.metric("auc", mean(&aucs));
    Ok(report)
}

/// Denoising sweep: for each target input SNR, reconstruct noisy planted
/// signals (best penalty over the grid, as in a hyper-parameter screen) and
/// report the mean reconstruction SNR.
pub fn run_denoise(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = cfg.denoise_lambda_grid();
    let mut report = ExperimentReport::new(cfg);
    let mut curve = Vec::new();

    for (si, &target_db) in cfg.snr_grid_db.iter().enumerate() {
        let recon_values: Vec<f64> = (0..cfg.seeds.max(1))
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let gen_seed = derive_seed(cfg.seed, (si * 1000 + rep) as u64);
                let pp = planted_partition(&cfg.sizes, cfg.p, cfg.q, gen_seed)?;
                let y_star = piecewise_signal(&pp.labels, &cfg.signal_values);
                let y_star_full = replicate_columns(&y_star, cfg.d);
                let y_star_mat = SignalMatrix::new(y_star_full.clone())?;
                let sigma2 = sigma2_for_input_snr(&y_star_mat, target_db)?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.seed,
                    (0x2000 + si * 1000 + rep) as u64,
                ));
                let y = noisy_realizations(&y_star, cfg.d, sigma2, &mut rng);

                let embedder = Embedder::new(&y, &pp.graph, cfg.k_max)?;
                let opts = cfg.spectral_opts();
                let mut best = f64::NEG_INFINITY;
                for &lambda in &grid {
                    let res =
                        solve_screen_with(&embedder, &y, &pp.graph, lambda, cfg.k_max, &opts)?;
                    let snr =
                        recon_snr_db(y_star_full.view(), res.solution.reconstruction.view());
                    if snr > best {
                        best = snr;
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;

        let m = mean(&recon_values);
        report.metric(format!("recon_snr_db_at_{}db", fmt_num(target_db)), m);
        report.metric(
            format!("recon_snr_gain_db_at_{}db", fmt_num(target_db)),
            m - target_db,
        );
        curve.push((target_db, m));
    }
    report.curve("snr_in_vs_out", curve);
    Ok(report)
}

/// The three edge-density settings used by the timing comparison.
pub const TIMING_SETTINGS: [(f64, f64); 3] = [(0.1, 0.01), (0.5, 0.1), (0.9, 0.2)];

/// Wall-clock timing of the screening solver as the edge count grows.
pub fn run_timing(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(cfg);
    let mut curve = Vec::new();
    let mut setting_means = Vec::new();

    for (si, &(p, q)) in TIMING_SETTINGS.iter().enumerate() {
        let mut times = Vec::new();
        let mut edge_counts = Vec::new();
        for rep in 0..cfg.seeds.max(1) {
            let gen_seed = derive_seed(cfg.seed, (0x3000 + si * 100 + rep) as u64);
            let pp = planted_partition(&cfg.sizes, p, q, gen_seed)?;
            let y_star = piecewise_signal(&pp.labels, &cfg.signal_values);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.seed,
                (0x4000 + si * 100 + rep) as u64,
            ));
            let y = noisy_realizations(&y_star, cfg.d, cfg.sigma2, &mut rng);

            let start = Instant::now();
            let _ = gtf_core::spectral::solve_p2_screen(
                &y,
                &pp.graph,
                cfg.lambda,
                cfg.k_max,
                &cfg.spectral_opts(),
            )?;
            times.push(start.elapsed().as_secs_f64());
            edge_counts.push(pp.graph.edge_count() as f64);
        }
        let suffix = format!("p{}_q{}", fmt_num(p * 100.0), fmt_num(q * 100.0));
        report.metric(format!("wall_time_mean_s_{suffix}"), mean(&times));
        report.metric(format!("wall_time_std_s_{suffix}"), std_dev(&times));
        report.metric(format!("edges_mean_{suffix}"), mean(&edge_counts));
        curve.push((mean(&edge_counts), mean(&times)));
        setting_means.push(mean(&times));
    }
    let max = setting_means.iter().cloned().fold(f64::MIN, f64::max);
    let min = setting_means.iter().cloned().fold(f64::MAX, f64::min);
    report.metric("wall_time_ratio_max_min", max / min);
    report.curve("edges_vs_wall_time", curve);
    Ok(report)
}

/// Features and ground-truth classes for a classification run.
pub struct SslData {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

/// Built-in stand-in dataset: three Gaussian blobs of 50 points.
pub fn default_blobs(seed: u64) -> SslData {
    let centers = [[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]];
    let (features, labels) = gaussian_blobs(&centers, 50, 1.0, derive_seed(seed, 0xB70B));
    SslData { features, labels }
}

/// Repeated-trial semi-supervised classification: build a k-NN graph over
/// the features, observe a random fraction of labels per trial, solve the
/// masked-label problem, and score misclassification on the unlabeled
/// samples.
pub fn run_ssl(cfg: &RunConfig, data: Option<SslData>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = data.unwrap_or_else(|| default_blobs(cfg.seed));
    let n = data.features.nrows();
    if data.labels.len() != n {
        return Err(HarnessError::Config(format!(
            "{} feature rows but {} labels",
            n,
            data.labels.len()
        )));
    }
    let num_classes = cfg
        .num_classes
        .unwrap_or_else(|| data.labels.iter().max().map_or(2, |m| m + 1).max(2));
    let graph = knn_graph(data.features.view(), cfg.knn)?;
    let labeled_count = ((cfg.label_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let method = match cfg.method {
        Method::Spectral => MapMethod::Spectral,
        Method::Sa => MapMethod::Sa,
    };

    let errors: Vec<(f64, f64)> = (0..cfg.trials.max(1))
        .into_par_iter()
        .map(|trial| -> Result<(f64, f64)> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x5510 + trial as u64));
            let mask = sample_mask(n, labeled_count, &mut rng);
            let observed: Vec<i64> = (0..n)
                .map(|i| if mask[i] { data.labels[i] as i64 } else { -1 })
                .collect();
            let inst = MapInstance::from_labels(
                graph.clone(),
                &observed,
                Some(num_classes),
                None,
                cfg.lambda,
                cfg.epsilon,
            )?;
            let opts = MapOpts {
                spectral: gtf_core::spectral::SpectralOpts {
                    seed: derive_seed(cfg.seed, 0x60D + trial as u64),
                    restarts: cfg.restarts,
                    max_iter: cfg.max_iter,
                    reweight_passes: cfg.reweight_passes,
                },
                schedule: cfg.schedule(),
                sa_restarts: cfg.sa_restarts,
            };
            let sol = solve_map(&inst, cfg.k_max, method, &opts)?;
            let mut wrong = 0usize;
            let mut total = 0usize;
            for (i, &observed) in mask.iter().enumerate() {
                if observed {
                    continue;
                }
                total += 1;
                if sol.predicted[i] != data.labels[i] {
                    wrong += 1;
                }
            }
            Ok((wrong as f64 / total.max(1) as f64, sol.assignment.k() as f64))
        })
        .collect::<Result<_>>()?;

    let rates: Vec<f64> = errors.iter().map(|e| e.0).collect();
    let ks: Vec<f64> = errors.iter().map(|e| e.1).collect();
    let mut report = ExperimentReport::new(cfg);
    report.metric("misclassification_mean", mean(&rates));
    report.metric("misclassification_var", variance(&rates));
    report.metric("k_mean", mean(&ks));
    report.metric("trials", rates.len() as f64);
    report.curve(
        "misclassification_per_trial",
        rates.iter().enumerate().map(|(i, &r)| (i as f64, r)).collect(),
    );
    Ok(report)
}

/// Diagnostic curve attached to a generic solve: the per-k objective table
/// (spectral) or the annealing energy trace.
pub enum SolveCurve {
    PerK(Vec<gtf_core::spectral::ScreenEntry>),
    Trace(Vec<gtf_core::sa::TracePoint>),
}

impl SolveCurve {
    /// Render as CSV: `k,objective` or `temperature,sweep,energy`.
    pub fn to_csv(&self) -> String {
        match self {
            SolveCurve::PerK(entries) => {
                let mut s = String::from("k,objective\n");
                for e in entries {
                    s.push_str(&format!("{},{}\n", e.k, e.p1_objective));
                }
                s
            }
            SolveCurve::Trace(points) => {
                let mut s = String::from("temperature,sweep,energy\n");
                for p in points {
                    s.push_str(&format!("{},{},{}\n", p.temperature, p.sweep, p.energy));
                }
                s
            }
        }
    }
}

/// Generic solve on user-supplied data with the configured method.
pub fn solve_gtf(
    y: &SignalMatrix,
    g: &Graph,
    cfg: &RunConfig,
) -> Result<(serde_json::Value, SolveCurve)> {
    match cfg.method {
        Method::Spectral => {
            let res = gtf_core::spectral::solve_p2_screen(
                y,
                g,
                cfg.lambda,
                cfg.k_max,
                &cfg.spectral_opts(),
            )?;
            Ok((res.solution.to_json_value(), SolveCurve::PerK(res.per_k)))
        }
        Method::Sa => {
            let res = anneal_restarts(
                y,
                g,
                cfg.lambda,
                cfg.k_max,
                &cfg.schedule(),
                cfg.seed,
                cfg.sa_restarts,
            )?;
            Ok((res.solution.to_json_value(), SolveCurve::Trace(res.trace)))
        }
    }
}
