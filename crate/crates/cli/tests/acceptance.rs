//! Acceptance suite: every criterion below runs at its stated tolerance and
//! prints one `[PASS]`/`[FAIL]` line (visible with `--nocapture`).
//!
//! Data-dependent checks (a real road-network edge list, the iris table)
//! run only when the files are present under `data/` and print a skip note
//! otherwise.

use std::path::PathBuf;
use std::time::Instant;

use gtf_cli::config::RunConfig;
use gtf_cli::datasets::{noisy_realizations, piecewise_signal, replicate_columns};
use gtf_cli::experiments::{run_denoise, run_ssl, run_support_recovery, run_timing, SslData};
use gtf_cli::metrics::sigma2_for_input_snr;
use gtf_core::graph::{planted_partition, Graph};
use gtf_core::kmeans::derive_seed;
use gtf_core::map::{
    closed_form_b, closed_form_divergence, objective_q, objective_q1, MapInstance,
};
use gtf_core::model::{
    centroid_closed_form, l20_penalty, objective_p0, objective_p1, objective_q2, Assignment,
    GtfSolution,
};
use gtf_core::oracle::{brute_force_p1, enumerate_partitions, numeric_gradient};
use gtf_core::sa::{anneal_restarts, SaState, Schedule, SiteEnergy};
use gtf_core::eigen::{top_eigenpairs, Which};
use gtf_core::spectral::{
    build_embedding, optimal_alpha, solve_p2_screen, vpp_objective, SpectralOpts,
};
use gtf_core::SignalMatrix;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

struct Criterion {
    name: &'static str,
    started: Instant,
    budget_s: f64,
}

impl Criterion {
    fn start(name: &'static str, budget_s: f64) -> Self {
        Self { name, started: Instant::now(), budget_s }
    }

    fn pass(self) {
        let elapsed = self.started.elapsed().as_secs_f64();
        println!("[PASS] {} ({elapsed:.1}s)", self.name);
        assert!(
            elapsed < self.budget_s,
            "[FAIL] {}: runtime {elapsed:.1}s exceeds {:.0}s budget",
            self.name,
            self.budget_s
        );
    }

    fn fail(&self, detail: &str) -> ! {
        println!("[FAIL] {}: {detail}", self.name);
        panic!("{}: {detail}", self.name);
    }
}

fn data_file(name: &str) -> Option<PathBuf> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    path.exists().then_some(path)
}

fn random_graph(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Graph {
    let n = rng.random_range(lo..=hi);
    let a = (n / 2).max(1);
    planted_partition(&[a, n - a], 0.6, 0.2, rng.random()).unwrap().graph
}

fn random_assignment(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Assignment {
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    Assignment::new(labels, k).unwrap()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SignalMatrix {
    SignalMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 4.0 - 2.0))
        .unwrap()
}

#[test]
fn cut_identity_half_trace_equals_crossing_count() {
    let c = Criterion::start("cut identity: (1/2)Tr(X^T L X) = crossing-edge count, 200 pairs", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC07);
    for _ in 0..200 {
        let g = random_graph(&mut rng, 5, 100);
        let k = rng.random_range(1..=6);
        let x = random_assignment(&mut rng, g.n(), k);
        let xm = x.onehot();
        let trace = xm.t().dot(&g.laplacian_dense()).dot(&xm).diag().sum();
        let count = x.cut_size(&g);
        if (trace / 2.0 - count as f64).abs() > 1e-9 || (trace / 2.0).round() as usize != count {
            c.fail(&format!("trace/2 = {} vs count {count}", trace / 2.0));
        }
    }
    c.pass();
}

#[test]
fn objective_forms_agree_on_factored_estimates() {
    let c = Criterion::start(
        "objective equivalence: raw and factored forms agree to rel 1e-12, 100 instances",
        5.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0);
    for _ in 0..100 {
        let g = random_graph(&mut rng, 6, 30);
        let n = g.n();
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=4.min(n));
        // Every cluster nonempty and centroid rows pairwise distinct.
        let labels: Vec<usize> =
            (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let x = Assignment::new(labels, k).unwrap();
        let mu = Array2::from_shape_fn((k, d), |(r, cidx)| {
            (r * d + cidx) as f64 * 3.0 + rng.random::<f64>()
        });
        let y = random_signal(&mut rng, n, d);
        let lambda = rng.random::<f64>() * 2.0;
        let b = x.onehot().dot(&mu);
        let p0 = objective_p0(&y, b.view(), &g, lambda, 0.0).unwrap();
        let p1 = objective_p1(&y, &x, &mu, &g, lambda).unwrap();
        let rel = (p0 - p1).abs() / p0.abs().max(1e-30);
        if rel > 1e-12 {
            c.fail(&format!("raw {p0} vs factored {p1}, rel {rel:.2e}"));
        }
    }
    c.pass();
}

#[test]
fn elimination_identity_and_centroid_stationarity() {
    let c = Criterion::start(
        "elimination identity: 2 P1(X, mu*) + q(X) = ||Y||_F^2 to rel 1e-10, gradient 1e-10",
        5.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0x31);
    for _ in 0..100 {
        let g = random_graph(&mut rng, 6, 40);
        let n = g.n();
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=5.min(n));
        let labels: Vec<usize> =
            (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let x = Assignment::new(labels, k).unwrap();
        let y = random_signal(&mut rng, n, d);
        let lambda = rng.random::<f64>();
        let mu = centroid_closed_form(&x, &y).unwrap();
        let p1 = objective_p1(&y, &x, &mu, &g, lambda).unwrap();
        let q = objective_q2(&y, &x, &g, lambda).unwrap();
        let total = 2.0 * p1 + q;
        let rel = (total - y.frobenius_sq()).abs() / y.frobenius_sq();
        if rel > 1e-10 {
            c.fail(&format!("2 P1 + q = {total} vs ||Y||^2 = {}", y.frobenius_sq()));
        }
        let grad = x.onehot().t().dot(&(x.onehot().dot(&mu) - y.data()));
        let max_grad = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_grad > 1e-10 {
            c.fail(&format!("centroid gradient {max_grad:.2e}"));
        }
    }
    c.pass();
}

#[test]
fn alpha_attains_grid_minimum_of_truncation_error() {
    let c = Criterion::start(
        "alpha optimality: grid scan of the truncation error over 50 graphs",
        30.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 8, 40);
        let n = g.n();
        let gamma = top_eigenpairs(g.laplacian_dense().view(), n, Which::Smallest)
            .unwrap()
            .values;
        let k = rng.random_range(1..n.min(6));
        let alpha = optimal_alpha(g.laplacian_trace(), &gamma[..k], n, k).unwrap();
        let eps = |a: f64| -> f64 { gamma[k..].iter().map(|&v| (v - a) * (v - a)).sum() };
        let (lo, hi) = (gamma[k - 1], gamma[n - 1]);
        let steps = 400;
        let width = ((hi - lo) / steps as f64).max(1e-12);
        let best = (0..=steps)
            .map(|i| lo + width * i as f64)
            .min_by(|a, b| eps(*a).partial_cmp(&eps(*b)).unwrap())
            .unwrap();
        if (alpha - best).abs() > width + 1e-9 {
            c.fail(&format!("alpha {alpha} vs grid minimum {best} (step {width})"));
        }
    }
    c.pass();
}

#[test]
fn full_spectrum_embedding_objective_is_exact() {
    let c = Criterion::start(
        "full-spectrum exactness: group-sum objective + lambda alpha n = q + lambda alpha n, rel 1e-8, 20 instances",
        30.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xF5);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 6, 16);
        let n = g.n();
        let d = rng.random_range(1..=3);
        let y = random_signal(&mut rng, n, d);
        let lambda = 0.1 + rng.random::<f64>();
        let emb = build_embedding(&y, &g, lambda, n, &vec![1.0; n]).unwrap();
        let k = rng.random_range(1..=4);
        let x = random_assignment(&mut rng, n, k).compact();
        let vpp = vpp_objective(&emb, &x, lambda);
        let q = objective_q2(&y, &x, &g, lambda).unwrap();
        let shift = lambda * emb.alpha * n as f64;
        let rel = ((vpp + shift) - (q + shift)).abs() / (q + shift).abs().max(1.0);
        if rel > 1e-8 {
            c.fail(&format!("group-sum {vpp} vs trace form {q}, rel {rel:.2e}"));
        }
    }
    c.pass();
}

#[test]
fn heat_bath_probabilities_and_incremental_energy() {
    let c = Criterion::start(
        "heat bath: normalization 1e-12, hot limit 1/k within 1e-3, 1000 increment probes at 1e-8",
        30.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0x6B);
    let g = random_graph(&mut rng, 30, 30);
    let n = g.n();
    let y = random_signal(&mut rng, n, 2);
    let k = 5;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut state = SaState::new(&y, &g, labels, k, 0.8).unwrap();

    for _ in 0..200 {
        let i = rng.random_range(0..n);
        let cold = state.heat_bath_probabilities(i, 0.7);
        let sum: f64 = cold.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || cold.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            c.fail(&format!("probabilities sum {sum}"));
        }
        let hot = state.heat_bath_probabilities(i, 1e9);
        for &p in &hot {
            if (p - 1.0 / k as f64).abs() > 1e-3 {
                c.fail(&format!("hot-limit probability {p} vs 1/{k}"));
            }
        }
    }

    for probe in 0..1000 {
        let i = rng.random_range(0..n);
        let t = rng.random_range(0..k);
        let before = state.recompute_energy();
        let dh = state.delta(i, t);
        state.apply(i, t);
        let actual = state.recompute_energy() - before;
        if (dh - actual).abs() > 1e-8 {
            c.fail(&format!("probe {probe}: delta {dh} vs recompute {actual}"));
        }
    }
    c.pass();
}

#[test]
fn tiny_instances_reach_the_exhaustive_optimum() {
    let c = Criterion::start(
        "exhaustive baseline: SA >= 95% optimal on 50 tiny instances; screening bounded by trivial baselines",
        120.0,
    );
    let schedule = Schedule { t_start: 100.0, t_end: 0.001, cool: 0.999, sweeps_per_temp: 1 };
    let mut sa_hits = 0;
    let total = 50;
    for seed in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, seed));
        let n = rng.random_range(5..=8usize);
        let d = rng.random_range(1..=2usize);
        let a = (n / 2).max(2);
        let pp = planted_partition(&[a, n - a], 0.7, 0.3, seed).unwrap();
        let y = random_signal(&mut rng, n, d);
        let lambda = 0.1 + rng.random::<f64>() * 0.9;
        let oracle = brute_force_p1(&y, &pp.graph, lambda).unwrap();

        let sa = anneal_restarts(&y, &pp.graph, lambda, n, &schedule, seed, 5).unwrap();
        let rel = (sa.solution.p1_objective - oracle.p1_objective).abs()
            / oracle.p1_objective.abs().max(1.0);
        if rel <= 1e-8 {
            sa_hits += 1;
        }

        let screen =
            solve_p2_screen(&y, &pp.graph, lambda, n, &SpectralOpts::default()).unwrap();
        let k1 = GtfSolution::from_assignment(
            &y,
            &pp.graph,
            lambda,
            &Assignment::new(vec![0; n], 1).unwrap(),
        )
        .unwrap();
        let singletons = GtfSolution::from_assignment(
            &y,
            &pp.graph,
            lambda,
            &Assignment::new((0..n).collect(), n).unwrap(),
        )
        .unwrap();
        let bound = k1.p1_objective.min(singletons.p1_objective);
        if screen.solution.p1_objective > bound + 1e-9 {
            c.fail(&format!(
                "screening objective {} above trivial bound {bound}",
                screen.solution.p1_objective
            ));
        }
        if screen.solution.p1_objective < oracle.p1_objective - 1e-9 {
            c.fail("screening beat the exhaustive optimum");
        }
    }
    if sa_hits * 100 < total * 95 {
        c.fail(&format!("SA optimal on only {sa_hits}/{total}"));
    }
    c.pass();
}

#[test]
fn boundary_recovery_roc_is_nearly_perfect() {
    let c = Criterion::start(
        "boundary recovery: persistence-score ROC AUC >= 0.99 at 12 dB input, 5 seeds",
        60.0,
    );
    let cfg = RunConfig { seeds: 5, input_snr_db: Some(12.0), ..Default::default() };
    let report = run_support_recovery(&cfg).unwrap();
    let auc = report.metrics["auc"];
    if auc < 0.99 {
        c.fail(&format!("mean AUC {auc}"));
    }
    let snr = report.metrics["input_snr_db"];
    if (snr - 12.0).abs() > 0.2 {
        c.fail(&format!("input SNR {snr} off target"));
    }
    c.pass();
}

#[test]
fn denoising_beats_input_snr_by_five_db() {
    let c = Criterion::start(
        "denoising: reconstruction SNR at least 5 dB above input at the two highest grid points",
        120.0,
    );
    let cfg = RunConfig { seeds: 5, snr_grid_db: vec![6.0, 9.0, 12.0, 15.0], ..Default::default() };
    let report = run_denoise(&cfg).unwrap();
    for target in [12.0, 15.0] {
        let key = format!("recon_snr_gain_db_at_{}db", gtf_cli::report::fmt_num(target));
        let gain = report.metrics[&key];
        if gain < 5.0 {
            c.fail(&format!("gain at {target} dB input is only {gain:.2} dB"));
        }
    }
    c.pass();
}

#[test]
fn screening_finds_the_planted_cluster_count() {
    let c = Criterion::start(
        "cluster-count screening: k* = 3 on the planted instance in >= 4/5 seeds",
        60.0,
    );
    let cfg = RunConfig::default();
    let mut hits = 0;
    for seed in 0..5u64 {
        let pp = planted_partition(&cfg.sizes, cfg.p, cfg.q, derive_seed(0x57A, seed)).unwrap();
        let y_star = piecewise_signal(&pp.labels, &cfg.signal_values);
        let y_star_mat = SignalMatrix::new(replicate_columns(&y_star, cfg.d)).unwrap();
        let sigma2 = sigma2_for_input_snr(&y_star_mat, 12.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0x57B, seed));
        let y = noisy_realizations(&y_star, cfg.d, sigma2, &mut rng);
        let res =
            solve_p2_screen(&y, &pp.graph, cfg.lambda, 8, &cfg.spectral_opts()).unwrap();
        if res.solution.k == 3 {
            hits += 1;
        }
    }
    if hits < 4 {
        c.fail(&format!("k* = 3 in only {hits}/5 seeds"));
    }

    // Optional: a user-supplied road-network instance; skipped without data.
    match (data_file("minnesota_edges.txt"), data_file("minnesota_signal.csv")) {
        (Some(edges), Some(signal)) => {
            let (n, list) = gtf_core::io::read_edge_list(&edges).unwrap();
            let g = Graph::from_edges(n, &list).unwrap();
            let y_star = gtf_core::io::read_csv_matrix(&signal, false).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let y_star_vec = y_star.column(0).to_owned();
            let y = noisy_realizations(&y_star_vec, 1, 0.05, &mut rng);
            let res =
                solve_p2_screen(&y, &g, cfg.lambda, 8, &cfg.spectral_opts()).unwrap();
            println!("  optional road-network screen: k* = {}", res.solution.k);
            assert_eq!(res.solution.k, 4, "road-network k* should be 4");
        }
        _ => println!("  [SKIP] optional road-network screen (no data/minnesota_* files)"),
    }
    c.pass();
}

#[test]
fn spectral_wall_time_is_edge_insensitive() {
    let c = Criterion::start(
        "timing: spectral wall time varies < 5x while edge count varies ~10x",
        60.0,
    );
    let cfg = RunConfig { seeds: 10, ..Default::default() };
    let report = run_timing(&cfg).unwrap();
    let ratio = report.metrics["wall_time_ratio_max_min"];
    let edges_lo = report.metrics["edges_mean_p10_q1"];
    let edges_hi = report.metrics["edges_mean_p90_q20"];
    if edges_hi / edges_lo < 8.0 {
        c.fail(&format!("edge counts only vary {:.1}x", edges_hi / edges_lo));
    }
    if ratio >= 5.0 {
        c.fail(&format!("wall time ratio {ratio:.2}"));
    }
    c.pass();
}

#[test]
fn masked_label_closed_form_is_stationary_and_equivalent() {
    let c = Criterion::start(
        "masked-label closed form: gradient <= 1e-6 on 100 instances; enumeration bridge rel 1e-10; divergence reported",
        60.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0x9A9);
    let mut max_divergence = 0.0f64;
    for round in 0..100 {
        let n = rng.random_range(5..=9usize);
        let a = (n / 2).max(2);
        let pp = planted_partition(&[a, n - a], 0.8, 0.3, rng.random()).unwrap();
        let num_classes = rng.random_range(2..=3usize);
        let labels: Vec<i64> = (0..n)
            .map(|i| {
                if i == 0 || rng.random::<f64>() < 0.5 {
                    rng.random_range(0..num_classes) as i64
                } else {
                    -1
                }
            })
            .collect();
        let inst = MapInstance::from_labels(
            pp.graph,
            &labels,
            Some(num_classes),
            None,
            0.1 + rng.random::<f64>() * 0.4,
            0.01 + rng.random::<f64>() * 0.2,
        )
        .unwrap();
        let k = rng.random_range(1..=3usize);
        let x = {
            let mut l: Vec<usize> =
                (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
            l[0] = 0;
            Assignment::new(l, k).unwrap()
        };
        let b_tilde = closed_form_b(&x, &inst).unwrap();
        let f = |bt: &Array2<f64>| -> f64 {
            let b_full = x.onehot().dot(bt);
            objective_q(b_full.view(), &inst, 0.0).unwrap()
        };
        let grad = numeric_gradient(f, &b_tilde, 1e-5);
        let norm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            c.fail(&format!("round {round}: gradient norm {norm:.2e}"));
        }
        max_divergence = max_divergence.max(closed_form_divergence(&x, &inst).unwrap());
    }
    println!(
        "  literal-formula divergence from the stationary solution: up to {max_divergence:.3} (reported, not asserted)"
    );

    // Enumeration equivalence on n <= 7 through the documented cut bridge.
    for seed in 0..5u64 {
        let pp = planted_partition(&[3, 4], 0.8, 0.4, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0x99, seed));
        let labels: Vec<i64> = (0..7)
            .map(|i| if i == 0 || rng.random::<f64>() < 0.5 { (i % 2) as i64 } else { -1 })
            .collect();
        let inst =
            MapInstance::from_labels(pp.graph, &labels, Some(2), None, 0.25, 0.05).unwrap();
        for part in enumerate_partitions(7).unwrap() {
            let x = Assignment::from_labels(part).unwrap();
            let b_full = x.onehot().dot(&closed_form_b(&x, &inst).unwrap());
            let q = objective_q(b_full.view(), &inst, 0.0).unwrap();
            let l_b = l20_penalty(b_full.view(), inst.graph(), 0.0).unwrap() as f64;
            let bridged =
                q - inst.lambda * l_b + inst.lambda * 2.0 * x.cut_size(inst.graph()) as f64;
            let q1 = objective_q1(&x, &inst).unwrap();
            let rel = (bridged - q1).abs() / q1.abs().max(1.0);
            if rel > 1e-10 {
                c.fail(&format!("bridge mismatch {bridged} vs {q1}"));
            }
        }
    }
    c.pass();
}

#[test]
fn classification_desk_scale_error_rates() {
    let c = Criterion::start(
        "classification: blob misclassification <= 0.10 over 100 trials; iris checked when provided",
        300.0,
    );
    let cfg = RunConfig { trials: 100, ..Default::default() };
    let report = run_ssl(&cfg, None).unwrap();
    let err = report.metrics["misclassification_mean"];
    if err > 0.10 {
        c.fail(&format!("blob misclassification {err:.3}"));
    }

    match data_file("iris.csv") {
        Some(path) => {
            // Expected layout: four feature columns then a class index.
            let table = gtf_core::io::read_csv_matrix(&path, false).unwrap();
            let d = table.ncols() - 1;
            let features = table.slice(ndarray::s![.., ..d]).to_owned();
            let labels: Vec<usize> =
                table.column(d).iter().map(|&v| v.round() as usize).collect();
            let data = SslData { features, labels };
            let iris_report = run_ssl(&cfg, Some(data)).unwrap();
            let iris_err = iris_report.metrics["misclassification_mean"];
            println!("  iris misclassification: {iris_err:.4} (reference 0.038)");
            if (iris_err - 0.038).abs() > 0.05 {
                c.fail(&format!("iris misclassification {iris_err:.4} not within 0.05 of 0.038"));
            }
        }
        None => println!("  [SKIP] iris comparison (no data/iris.csv)"),
    }
    c.pass();
}
